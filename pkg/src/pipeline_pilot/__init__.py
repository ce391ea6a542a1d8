"""Zero-shot AutoML for tabular data.

Recommends machine-learning pipelines for a new dataset from text embeddings
of dataset metadata and of pipelines, transfers the nearest dataset's known
solution (directly or via a learned metric network), and can execute and
score pipelines natively.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
