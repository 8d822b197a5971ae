from .classifier import AUClassifier
from .networks import AlexSmallNet, DrmlNet, RegionLayer, build_network

__all__ = ["AUClassifier", "AlexSmallNet", "DrmlNet", "RegionLayer", "build_network"]
