"""capax: plan, run, and analyze capacity-versus-sample-size segmentation studies."""

__version__ = "0.1.0"
