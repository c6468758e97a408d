"""Shape-aware segmentation data pipeline.

Builds synthetic training datasets for human body-part segmentation around
an external renderer (scene manifests, mask extraction, compositing,
augmentation) and assembles 3-channel input tensors that combine an edge
response with two contrast-limited equalizations of the image.
"""

from .evaluate import (
    CommandPredictor,
    ConfusionCounts,
    EvalItem,
    EvalReport,
    PredictorError,
    confusion,
    dataset_stats,
    iou,
    render_report,
    run_ablation,
)
from .image import (
    BinaryMask,
    ChannelKind,
    FloatMap,
    GrayImage,
    ImageFormatError,
    InputTensor,
    Sat1Error,
    load_gray_image,
    load_mask,
    read_tensor,
    rgb_to_gray,
    save_gray_image,
    save_mask,
    save_tensor,
)
from .preprocess import (
    ClaheParams,
    EdgeBackend,
    EdgeBackendKind,
    ExternalBackendError,
    assemble_tensor,
    assemble_variant,
    clahe,
    edge_response,
)
from .rng import Xoshiro256, derive_seed
from .synthgen import (
    AugmentationSpec,
    SceneManifest,
    augment,
    composite,
    extract_mask,
    read_manifests,
    sample_manifest,
    sample_manifest_bulk,
    split_dataset,
    write_manifests,
)

__version__ = "0.1.0"
