"""PCST: semantic point-cloud geometry transmission over noisy wireless channels.

A desk-scale library covering the full chain: voxelized geometry -> multiscale
sparse codec -> entropy-guided variable-length JSCC -> AWGN/Rayleigh channel ->
reconstruction, plus a classical separate source-channel coding baseline and
MPEG-style D1/D2 geometry metrics.
"""

from .sparse import (
    SparseTensor,
    SparseConv,
    SparseConvTranspose,
    InceptionResBlock,
    sparse_conv,
    sparse_conv_transpose,
    prune,
    irn_block,
    ones_tensor,
)
from .pointcloud import PointCloud, load_ply, write_ply, voxelize, synth_shape, split_dataset
from .entropy import (
    FactorizedDensity,
    RateAllocation,
    quantize_proxy,
    likelihood,
    symbol_budget,
    quantize_budget,
    total_bandwidth,
    derive_klist,
)
from .jscc import SymbolSequence, JSCCEncoder, JSCCDecoder, power_normalize
from .channel import ChannelRealization, make_realization, transmit, equalize, bits_to_symbols
from .sideinfo import (
    SideInfoPayload,
    octree_encode,
    octree_decode,
    klen_encode,
    klen_decode,
    account_side_bits,
)
from .metrics import TransmissionReport, cbr, d1_psnr, d2_psnr, estimate_normals
from .multires import MultiResEncoder, MultiResDecoder, ScalePointCounts, topk_prune
from .pipeline import ModelConfig, PCSTModel, transmit_cloud
from .train import LossConfig, bce_distortion, rd_loss, train_model, evaluate, load_model
from .checkpoint import save_checkpoint, load_checkpoint
from .baseline import SSCCConfig, amc_select, sscc_transmit, DEFAULT_AMC_TABLE

__version__ = "0.1.0"
