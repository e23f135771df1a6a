from .masking import MaskPlan, random_mask, stack_plans  # noqa: F401
from .model import BedError, BrainEncoder, BrainDecoder, BrainEncoderDecoder, bed_forward  # noqa: F401
from .loss import bed_loss  # noqa: F401
from .train import BedPretraining, pretrain_bed, load_bed, cross_subject_container  # noqa: F401
from ..config import BedConfig  # noqa: F401
