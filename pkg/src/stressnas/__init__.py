"""Wrist-sensor affect classification toolkit.

Pipeline: multi-rate sensor recordings -> sliding windows -> filter-bank
images and summary statistics -> networks (hand-built or found by random
cell search ranked with a training-free gradient-covariance score) ->
leave-one-subject-out evaluation.
"""

__version__ = "0.1.0"
