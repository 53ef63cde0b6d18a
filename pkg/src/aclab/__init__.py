"""Replicated data-store laboratory.

Three consistency backends over one deterministic discrete-event network:

* ``sc`` -- a RAFT-replicated log (strong consistency),
* ``ec`` -- PN-Counter CRDTs with unbounded, immediate update distribution,
* ``ac`` -- the same CRDTs behind a bounded distribution queue whose size and
  flush timeout follow an online-adapted consistency level.

A load-balancer application drives all three from identical request traces so
their correctness/overhead trade-offs can be measured and compared.
"""

__version__ = "0.1.0"
