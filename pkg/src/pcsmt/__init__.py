"""Two-phase metamorphic testing for a marker-based position control system."""

from .engine import NOISE_INVARIANCE, MetamorphicRelation, RelationKind, TestVerdict, Verdict, check_mr, classify
from .geometry import FRAME_SIZE, Marker, MarkerSample, TripletGeometry, congruence_score, in_frame, rotate_about
from .logs import LogEntry, SeedInput, extract_seed, synthesize_log, verify_seed
from .morph import MorphedSuite, NoiseSpec, Phase, ReplicaKind, gen_exploitation, gen_exploration
from .reporting import CampaignReport, export_failure_distribution, summarize
from .sut import PcsOutput, ReferenceSut, SutConfig, find_true_markers

__version__ = "0.1.0"
