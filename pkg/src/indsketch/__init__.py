"""indsketch: streaming estimation of how far a pair stream is from independence.

The package computes a (1 +/- eps)-approximation of the entrywise L1 norm of
the implicit matrix a_ij = f_ij/m - f_i*f_j/m**2 defined by a stream of pairs,
i.e. the L1 distance between the stream's joint and product distributions.
The estimator stack: two Cauchy-sketch blackboxes (a stable-distribution
vector sketch and an Indyk-McGregor matrix sketch), a voting key-row finder,
a bucketed heavy-rows cover, and a recursive subsampling combiner.  An exact
two-pass oracle backs every randomized component in the test suite.
"""

__version__ = "0.1.0"
