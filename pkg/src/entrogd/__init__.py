"""Entropy-guided generalized deduplication.

Lossless columnar compression that splits fixed-width chunks into
dictionary-coded bases and verbatim deviations, picks base bits by
ascending bit entropy, and ships weighted condensed samples so clustering
can run on the compressed form directly.
"""

from .analytics import (
    ClusteringResult,
    MetricsReport,
    adjusted_mutual_information,
    approximation_ratio,
    compute_ratios,
    original_size_bytes,
    silhouette,
    sse_on,
    transfer_labels,
    weighted_kmeans,
)
from .basetree import BaseTree
from .bitmatrix import (
    BitStats,
    ColumnParams,
    IntegrityError,
    QuantizedMatrix,
    QuantizeError,
    bit_stats,
    dequantize,
    quantize_dataset,
)
from .codec import (
    Archive,
    CompressStats,
    base_centroids,
    compress,
    compress_with_stats,
    decompress,
    default_m_max,
    extract_condensed,
    read_condensed,
)
from .selection import (
    BitSelection,
    CondensedSampleSet,
    SizeModel,
    SizeTrace,
    compressed_size,
    generate_condensed_samples,
    greedy_select_bits,
    id_bits,
    select_compression_bits,
    weight_bits,
)

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "BaseTree",
    "BitSelection",
    "BitStats",
    "ClusteringResult",
    "ColumnParams",
    "CompressStats",
    "CondensedSampleSet",
    "IntegrityError",
    "MetricsReport",
    "QuantizeError",
    "QuantizedMatrix",
    "SizeModel",
    "SizeTrace",
    "adjusted_mutual_information",
    "approximation_ratio",
    "base_centroids",
    "bit_stats",
    "compress",
    "compress_with_stats",
    "compressed_size",
    "compute_ratios",
    "decompress",
    "default_m_max",
    "dequantize",
    "extract_condensed",
    "generate_condensed_samples",
    "greedy_select_bits",
    "id_bits",
    "original_size_bytes",
    "quantize_dataset",
    "read_condensed",
    "select_compression_bits",
    "silhouette",
    "sse_on",
    "transfer_labels",
    "weight_bits",
    "weighted_kmeans",
    "__version__",
]
