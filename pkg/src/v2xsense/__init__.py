"""C-V2X spectrum sensing workbench.

Generates vehicular traffic and link data, synthesizes wideband spectrum
snapshots, compresses them below the Nyquist rate, reconstructs them with
classical solvers or a trained network, and scores the result with detection
and similarity metrics.
"""

from .channel import (BandConfig, Connection, ConnectionSet, band_by_name,
                      build_connections, path_loss_sub6, path_loss_thz,
                      sub6ghz_band, thz_band)
from .cs_baseline import CsSolverConfig, fista_reconstruct, omp_reconstruct
from .dataset import (Dataset, DatasetHeader, ScenarioConfig, generate_dataset,
                      read_dataset, write_dataset)
from .estimators import (FistaReconstructor, LearnedReconstructor,
                         OmpReconstructor, SubNyquistCompressor)
from .evaluation import (DetectionReport, cosine_similarity, detection_rates,
                         energy_detect, evaluate_run, mse, render_table, ssim_1d)
from .mobility import (RoadConfig, TrajectorySet, VehicleParams, VehiclePose,
                       parse_fcd_trace, run_scenario)
from .reconstructor import (ModelArchitecture, ModelWeights,
                            extract_sensing_matrix, forward, forward_complex,
                            load_weights, save_weights)
from .sensing import (Measurements, SensingMatrix, compress, load_matrix,
                      random_sensing_matrix, save_matrix)
from .specgen import (OccupancyMap, SpectrumSample, add_noise,
                      allocate_subcarriers, dft, idft, max_blocks, normalize,
                      synthesize_spectrum)

__version__ = "0.1.0"
