"""Packet-to-cell segmentation in input-queued crossbar switches.

Modules
-------
quantize
    Moments and pmfs of service times rounded up to whole cells.
mg1
    M/G/1 mean queue length with quantized service; required speed-up.
segmenter
    Segmentation and the cell-merging state machine.
islip
    iSLIP matching.
traffic
    Trace parsing, synthetic generators and utilization scaling.
simcore
    VOQ crossbar simulator and the speed-up experiments.
cli
    ``cellseg`` command-line front end.
"""
from .errors import (
    CellsegError,
    DivergenceError,
    HeuristicError,
    InstabilityError,
    ParameterError,
    PoleError,
    ReassemblyError,
    RoutingError,
    SearchFailure,
    TraceParseError,
    TruncationError,
)
from .islip import IslipState, islip_schedule
from .mg1 import (
    QueueModelParams,
    SegmentationScenario,
    laplace_W_mm1q,
    mean_from_transform,
    mm1q_mean_customers,
    pk_mean_customers,
    pk_transform_mm1q,
    required_speedup,
    segmentation_scenario_analysis,
)
from .quantize import (
    Erlang2,
    Exponential,
    Gamma,
    Hyperexp2,
    QuantizedMoments,
    QuantizedPMF,
    TabulatedCDF,
    ceil_erlang2_moments,
    ceil_exponential_moments,
    ceil_hyperexp2_moments,
    erlang2_ceiling_mgf,
    gamma_fit,
    heuristic_moments,
    pmf_moments,
    quantize_general,
)
from .segmenter import Cell, Packet, SegmenterFSM, overhead_stats, segment_packet
from .simcore import (
    SimStats,
    SwitchConfig,
    find_min_speedup,
    reassemble_and_verify,
    run_simulation,
    simulate_quantized_mg1,
    sweep_utilization,
)
from .traffic import (
    BimodalLength,
    SyntheticSpec,
    generate_synthetic,
    parse_trace,
    scale_to_utilization,
)

__version__ = "0.1.0"
