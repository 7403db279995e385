"""Provider service speaking gateway protocol v1.

Implements the protocol and the published stub semantics from the interface
documents alone; it deliberately does not import the simulator package, so
conformance is pinned by the shared golden transcripts rather than shared
code.
"""

__version__ = "0.1.0"
