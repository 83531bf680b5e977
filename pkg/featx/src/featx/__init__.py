"""Image feature-extraction front end for the multi-code hashing pipeline.

Extracts one whole-image feature vector plus five fixed-crop region vectors
(four corners and one middle, side ratio sigma) per image with a
convolutional backbone, and writes the pipeline's binary MCHF/MCHR/MCHL
files.  Talks to the indexing side purely through those file formats.
"""

__version__ = "0.1.0"
