from .tokenizer import Vocabulary, TokenizedCaption, SPECIALS  # noqa: F401
from .lm import BlmError, FrozenStackError, CausalLM, pretrain_lm, load_lm, sequence_nll, LanguageModelPretraining  # noqa: F401
from .qformer import QFormer, VisualTokenizer, FrozenStack, pretrain_vlp, VlpPretraining  # noqa: F401
from .model import FmriProjector, BrainLanguageModel, bt_former_forward, blm_loss, feature_loss  # noqa: F401
from .train import BlmTraining, train_blm, load_blm, select_captions  # noqa: F401
from .decoding import greedy_decode, beam_decode, decode, generate_caption, generate_captions, caption_from_image_features  # noqa: F401
from ..config import BlmConfig  # noqa: F401
