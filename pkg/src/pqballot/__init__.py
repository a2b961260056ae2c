"""pqballot: a desk-scale, quantum-secure e-voting node.

Subpackages/modules map to the system's layers:

- falcon: lattice signatures (keygen / sign / verify / encodings)
- biometric: embedding normalization, cosine matching, liveness gating
- ledger: hash-chained, authority-signed block store with gas accounting
- registry: voter/candidate state machine replayable from the ledger
- protocol: enrollment and vote-casting flows with single-use auth sessions
- service: REST API + metrics endpoint
- bench: load harness reproducing the latency/size/gas measurements
"""

__version__ = "0.1.0"
