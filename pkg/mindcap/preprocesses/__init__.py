from ._base import preprocess, Preprocess, PreprocessError  # noqa: F401
from .fmri import Standardizer, Aligner, NoiseInjector  # noqa: F401
