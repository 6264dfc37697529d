"""Source/follow-up execution and metamorphic relation checking."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import CampaignError, NoUsableSeed, SeedRegression, TransportError, UnsupportedRelation
from .geometry import MarkerSample
from .logs import SeedInput
from .morph import FollowUp, MorphedSuite
from .sut import CORRECT, PcsOutput

log = logging.getLogger(__name__)

DEFAULT_BATCH = 2048


class RelationKind(str, Enum):
    EQUIVALENCE = "equivalence"
    EQUALITY = "equality"
    SUBSET = "subset"
    DISJOINT = "disjoint"
    COMPLETE = "complete"
    DIFFERENCE = "difference"


def _same_markers_selected(source: PcsOutput, followup: PcsOutput) -> bool:
    # Morphing only appends noise, so the true triplet keeps indexes 0..2.
    return source == CORRECT and followup == CORRECT


@dataclass(frozen=True)
class MetamorphicRelation:
    kind: RelationKind
    input_relation: str
    output_relation: Optional[Callable[[PcsOutput, PcsOutput], bool]] = None

    def holds(self, source: PcsOutput, followup: PcsOutput) -> bool:
        if self.kind is not RelationKind.EQUIVALENCE or self.output_relation is None:
            raise UnsupportedRelation(f"relation kind {self.kind.value!r} is declared but not executable")
        return self.output_relation(source, followup)


# f(X_s) equivalent to f(X_s ++ X_n): adding reflections must not change which markers are found.
NOISE_INVARIANCE = MetamorphicRelation(
    RelationKind.EQUIVALENCE,
    "morphed = seed ++ noise",
    _same_markers_selected,
)


def check_mr(source: PcsOutput, followup: PcsOutput, mr: MetamorphicRelation = NOISE_INVARIANCE) -> bool:
    return mr.holds(source, followup)


class Verdict(str, Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"


def classify(followup: PcsOutput) -> Verdict:
    if not followup.found:
        return Verdict.FN
    if followup.indexes == (0, 1, 2):
        return Verdict.TP
    return Verdict.FP


@dataclass(frozen=True)
class TestVerdict:
    seed_index: int
    sample: MarkerSample
    source_output: PcsOutput
    followup_output: PcsOutput
    outcome: Verdict
    angle: Optional[float] = None

    __test__ = False  # not a pytest class

    @property
    def failed(self) -> bool:
        return self.outcome is not Verdict.TP

    def to_json(self) -> dict:
        obj = {
            "seed_index": self.seed_index,
            "class": self.outcome.value,
            "markers": self.sample.to_json(),
        }
        obj.update(self.followup_output.to_json())
        if self.angle is not None:
            obj["angle"] = self.angle
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "TestVerdict":
        out = PcsOutput.from_json(obj)
        v = cls(int(obj["seed_index"]), MarkerSample.of(obj["markers"]), CORRECT, out,
                Verdict(obj["class"]), obj.get("angle"))
        if classify(out) is not v.outcome:
            raise ValueError(f"verdict line is inconsistent: class {v.outcome.value} for output {out}")
        return v


def run_source(seed: SeedInput, sut) -> list[PcsOutput]:
    """Execute the source tests; any misclassified seed sample aborts the campaign."""
    if len(seed) == 0:
        raise NoUsableSeed("no usable seed")
    outputs = sut.find_many(seed.as_samples())
    for i, out in enumerate(outputs):
        if out != CORRECT:
            raise SeedRegression(i, out)
    return outputs


def _chunks(seq, size):
    for lo in range(0, len(seq), size):
        yield lo, seq[lo:lo + size]


def run_followups(
    suite: MorphedSuite | Iterable[FollowUp],
    sut,
    source_outputs: Optional[list[PcsOutput]] = None,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH,
    start: int = 0,
    on_batch: Optional[Callable[[list[TestVerdict]], None]] = None,
) -> list[TestVerdict]:
    """Execute every follow-up once and classify it.

    Batches may run on ``workers`` threads; results come back in suite order
    regardless. ``start`` skips already-finished cases when resuming and
    ``on_batch`` receives each completed batch in order, so callers can
    persist progress. A transport failure raises :class:`CampaignError` whose
    ``completed`` is the count of cases finished (including ``start``).
    """
    cases = list(suite)
    if not cases:
        raise ValueError("follow-up suite is empty")
    pending = cases[start:]
    verdicts: list[TestVerdict] = []

    def execute(batch: list[FollowUp]) -> list[TestVerdict]:
        outputs = sut.find_many([c.sample for c in batch])
        res = []
        for c, out in zip(batch, outputs):
            if out.found and max(out.indexes) >= len(c.sample):
                raise ValueError(f"SUT returned index out of range for a {len(c.sample)}-marker sample: {out}")
            src = source_outputs[c.seed_index] if source_outputs is not None else CORRECT
            res.append(TestVerdict(c.seed_index, c.sample, src, out, classify(out), c.angle))
        return res

    batches = [b for _, b in _chunks(pending, batch_size)]
    try:
        if workers <= 1:
            results = map(execute, batches)
            for res in results:
                verdicts.extend(res)
                if on_batch:
                    on_batch(res)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for res in pool.map(execute, batches):
                    verdicts.extend(res)
                    if on_batch:
                        on_batch(res)
    except TransportError as exc:
        done = start + len(verdicts)
        log.error("transport failure after %d of %d follow-ups: %s", done, len(cases), exc)
        raise CampaignError(f"SUT transport failed after {done} follow-ups: {exc}", done, exc) from exc
    return verdicts


def write_verdicts(verdicts: Iterable[TestVerdict], path, append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(json.dumps(v.to_json(), separators=(",", ":")) + "\n")


def read_verdicts(path) -> list[TestVerdict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(TestVerdict.from_json(json.loads(line)))
    return out
