from .pipeline import (  # noqa: F401
    Pipeline, RunRecord, StageError, Workspace, run_pipeline, STAGES, RECORD_FILE
)
from .sweep import noise_sweep, read_sweep_csv, CSV_FIELDS, CSV_SCHEMA_VERSION  # noqa: F401
from .ablation import ablate, check_captioning_ordering, check_reconstruction_ordering, RECON_VARIANTS  # noqa: F401
from .report import report, render_table, render_record, validate, load_schema, ReportError  # noqa: F401
from ..config import ExperimentConfig, HarnessConfig, load_config  # noqa: F401
