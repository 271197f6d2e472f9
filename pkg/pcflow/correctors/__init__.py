from pcflow.correctors.base import (
    Corrector,
    CorrectorConfig,
    get_corrector,
    run_corrector,
)
