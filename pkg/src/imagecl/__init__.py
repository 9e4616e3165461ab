"""ImageCL: a source-to-source compiler and auto-tuner for image-processing kernels."""

__version__ = "0.1.0"
