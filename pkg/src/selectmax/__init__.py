"""Select-max estimation of a one-sided exponential source from K independent
encodings: closed-form laws, a reproducible Monte Carlo engine and the
statistical tests that tie them together."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ModelParams,
    TrialRecord,
    UniformStream,
    make_params,
    sample_channel_output,
    sample_source,
    select_max,
)
from .analytic import (  # noqa: E402
    AnalyticLaw,
    ErasureWeighting,
    Weighting,
    combined_distortion,
    erasure_ccdf_closed,
    erasure_ccdf_printed,
    erasure_ccdf_sum,
    erasure_error_pdf,
    error_law,
    output_marginal,
    rdf,
    selectmax_output_atom,
)
from .montecarlo import BatchConfig, BatchSummary, TrialDataset, run_batch, run_trial  # noqa: E402
