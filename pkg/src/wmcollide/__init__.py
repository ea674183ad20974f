"""wmcollide: a desk-scale laboratory for text-watermark collisions.

Three logit-bias watermark schemes over a corpus-trained n-gram language
model, a watermark-then-paraphrase pipeline, FPR-calibrated detection,
and a harness that measures how dual watermarks degrade each other.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, save_config
from .dataset import Dataset, build_dataset, load_dataset, save_dataset
from .detect import (
    CalibratedThreshold,
    DetectionResult,
    calibrate,
    score,
    tpr_at_fpr,
    z_filter,
)
from .harness import CollisionReport, compute_findings, emit_report, run_collision_matrix
from .pipeline import GenerationJob, ParaphraseJob, generate, paraphrase
from .toylm import (
    TextSample,
    TokenModel,
    Vocabulary,
    ingest_corpus,
    load_model,
    sample_token,
    save_model,
    train_lm,
)
from .watermark import (
    GreenMask,
    SchemeConfig,
    SchemeKind,
    SeedingMode,
    Strength,
    bias_logits,
    green_mask_kgw,
    green_mask_prw,
    make_scheme,
    sir_bias,
)
