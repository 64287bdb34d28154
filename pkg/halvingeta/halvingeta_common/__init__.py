from halvingeta.halvingeta_common.hashrate import HashrateError, Shift
from halvingeta.halvingeta_common.ingest import FetchError, SnapshotError
from halvingeta.halvingeta_common.models import (
    ChainSnapshot,
    ConfidenceInterval,
    HalvingError,
    HeaderRecord,
    ParameterError,
    Prediction,
    RetargetParams,
    RetargetPosition,
)
from halvingeta.halvingeta_common.retarget import CovarianceMode, VarianceForm
from halvingeta.halvingeta_common.settings import SettingError, Settings
from halvingeta.halvingeta_common.simulator import (
    Granularity,
    SimulationConfig,
    SimulationError,
    SimulationSummary,
)
from halvingeta.halvingeta_common.units import UnitsError

__all__ = [
    "ChainSnapshot",
    "ConfidenceInterval",
    "CovarianceMode",
    "FetchError",
    "Granularity",
    "HalvingError",
    "HashrateError",
    "HeaderRecord",
    "ParameterError",
    "Prediction",
    "RetargetParams",
    "RetargetPosition",
    "SettingError",
    "Settings",
    "Shift",
    "SimulationConfig",
    "SimulationError",
    "SimulationSummary",
    "SnapshotError",
    "UnitsError",
    "VarianceForm",
]
