"""Semi-synthetic 3d crack volumes and segmentation methods for concrete CT."""

__version__ = "0.1.0"

from .errors import (
    ContractError,
    CorruptFileError,
    CrackSegError,
    FormatError,
    GenerationError,
    ParameterError,
    ShapeError,
    TrainingError,
)
from .evaluate import (
    ConfusionCounts,
    GridSpec,
    Metrics,
    confusion_with_tolerance,
    coordinate_grid_search,
    evaluate_pair,
    report,
)
from .features import (
    FeatureBankConfig,
    eigenvalues3,
    feature_bank,
    feature_names,
    hessian,
    principal_direction,
)
from .filters import (
    FrangiParams,
    SheetParams,
    frangi_response,
    normalize_to_8bit,
    sheet_response,
    threshold,
)
from .forest import (
    Forest,
    TrainingSet,
    assemble_training,
    load_forest,
    predict_forest,
    save_forest,
    train_forest,
)
from .geometric import (
    AdaptiveMorphParams,
    TemplateParams,
    adaptive_morph,
    sphere_directions,
    template_match,
)
from .paths import (
    MinimalPathParams,
    PercolationParams,
    hessian_percolation,
    minimal_paths,
    minimal_paths_coherence,
    percolation_counter,
)
from .presets import preset_names, resolve_preset
from .segment import METHODS, segment
from .synth import (
    CompositeParams,
    CrackSpec,
    FbsField,
    PhantomSpec,
    build_crack_mask,
    composite,
    generate_dataset,
    generation_profile,
    simulate_fbs,
    synthesize_background,
)
from .volume import dilate, gaussian_blur, invert, read_volume, write_volume
