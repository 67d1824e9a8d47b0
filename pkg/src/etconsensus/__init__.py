"""Event-triggered consensus over lossy, delayed broadcast networks.

Simulation of decentralized event-triggered single-integrator consensus with
per-receiver packet drops (MANSD-capped) and time-varying delays, plus the
closed-form certificates for the minimum inter-event time and the largest
admissible delay.
"""
from .bounds import (BoundsReport, DropoutSpec, TriggerParams, certify,
                     gamma_loss, h_coefficients, k_coefficients,
                     max_admissible_delay, min_inter_event_time, xi_gain)
from .engine import Scenario, TraceLog, VerificationReport, disagreement, run, verify
from .graph import (DecayCertificate, DirectedGraph, LaplacianSet, build_graph,
                    decay_envelope, has_spanning_tree, laplacian_set, spectral_norm)
from .network import ChannelConfig, LossyChannel
from .protocol import (Ack, AgentState, Packet, control_input, control_input_avg,
                       make_broadcast, on_ack, on_receive, should_trigger)

__version__ = "0.1.0"
