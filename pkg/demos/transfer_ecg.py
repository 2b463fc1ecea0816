"""Send the normal and the abnormal ECG statement from system A to system B."""
from importlib import resources

from semlink.transfer import PipelineConfig, run_pipeline

DATA = resources.files("semlink") / "data" / "ecg"

for name in ("pipeline.json", "pipeline_abnormal.json"):
    result = run_pipeline(PipelineConfig.load(DATA / name))
    report = result.report
    print(f"== {name}")
    print("   triples per step:", dict(report.counts))
    print("   root recognised as:", dict(report.recognized)[report.root])
    print("   template:", report.template)
    print(result.document)
