"""Toy-scale dual-branch enhancement network in HVI space."""
from .layers import (
    Conv,
    CrossAttention,
    Embedding,
    GatedLayer,
    LightenCrossAttention,
    Module,
)
from .model import (
    STEM_VARIANTS,
    CidNet,
    CidnetConfig,
    Stem,
    cidnet_forward,
    params_from_dict,
    params_to_dict,
    reflect_pad_image,
)
from .transform import HviTransform


def cab_forward(block: LightenCrossAttention, y_i, y_hv, direction="i"):
    """One direction of a block's attention: ``"i"`` refines the intensity
    branch guided by HV, ``"hv"`` the reverse."""
    if direction == "i":
        return block.cab_i(y_i, y_hv if block.cross else y_i)
    if direction == "hv":
        return block.cab_hv(y_hv, y_i if block.cross else y_hv)
    raise ValueError(f"direction must be 'i' or 'hv', got {direction!r}")


def iel_forward(block: LightenCrossAttention, y):
    return block.iel(y)


def cdl_forward(block: LightenCrossAttention, y):
    return block.cdl(y)


def lca_forward(block: LightenCrossAttention, y_i, y_hv):
    return block(y_i, y_hv)
