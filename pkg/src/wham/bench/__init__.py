"""Datasets, LSH encoding, metrics and the benchmark driver."""

from .datasets import VectorDataset, parse_xvecs, read_xvecs, synthetic, write_xvecs
from .encode import WEIGHT_SCHEMES, EncodedDataset, encode_query, lsh_encode, make_weights
from .harness import METHODS, BenchConfig, Workload, prepare_workload, run_benchmark, write_csv
from .metrics import MetricsReport, precision_at_k
