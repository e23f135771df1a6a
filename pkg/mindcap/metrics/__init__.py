from ._base import normalize, NormalizedCaption, MetricError, caption_metric  # noqa: F401
from .text import rouge_l, cider, corpus_cider, meteor_lite, CorpusStats, lcs_length  # noqa: F401
from .embedding import TextEncoder, embed_similarity, mean_embed_similarity  # noqa: F401
from .image import (  # noqa: F401
    pixcorr, ssim, two_way_identification, feature_distance,
    FeatureExtractor, PixelExtractor, RandomProjectionExtractor
)
from .stats import permutation_null, bootstrap_ci  # noqa: F401
from .report import MetricReport, TEXT_METRICS, IMAGE_METRICS, SCHEMA_VERSION  # noqa: F401
from .evaluate import (  # noqa: F401
    caption_scores, evaluate_captions, evaluate_images, image_pair_scores, object_match, attribute_recall, cider_null,
    identification_null
)
