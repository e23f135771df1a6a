from ..context import mindcap
from mindcap import blm, bed, layers
import pytest
import torch

WORDS = ['a', 'red', 'blue', 'cat', 'dog', 'in', 'kitchen', 'park']


@pytest.fixture
def vocabulary():
    return mindcap.Vocabulary(WORDS)


@pytest.fixture
def lm(vocabulary):
    torch.manual_seed(0)
    return mindcap.CausalLM(len(vocabulary), dim=16, depth=1, heads=2, max_positions=20).double().eval()


@pytest.fixture
def stack(lm, vocabulary):
    torch.manual_seed(1)
    config = mindcap.BlmConfig(query_count=4, qformer_dim=8, qformer_depth=1, qformer_heads=2, visual_tokens=3, lm_dim=16)
    modules = blm.qformer.build_vlp_modules(config, feature_dim=6)
    for module in modules.values():
        module.apply(layers.init_weights).double()
    torch.nn.init.normal_(modules['qformer'].queries, std=.5)
    return mindcap.FrozenStack(modules['qformer'], modules['text_projector'], modules['visual_tokenizer'], lm, vocabulary)


@pytest.fixture
def brain_model():
    torch.manual_seed(2)
    model = bed.BrainEncoderDecoder(patch_count=6, patch_size=4, dim=8, encoder_depth=2, decoder_dim=8, decoder_depth=1, heads=2)
    return mindcap.BrainLanguageModel(model.encoder, qformer_dim=8, fmri_tokens=3).double()
