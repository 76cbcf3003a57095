"""lowdim - Variational inference with low-dimensional transport maps."""

__version__ = "0.1.0"
__author__ = "Adam Miller"
__email__ = "admiller@redhat.com"
