"""Cross-validation and experiment protocols.

Stratified fold planning, accuracy, model evaluation over folds, and the
subject-dependent / subject-independent experiment drivers with a stable
structured-text report format.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .features import trial_feature_matrix
from .signals import CHANNELS_5, Label, binarize_rating, select_channels
from .svm import (AROVAL, GAMMA_SCALE, DEFAULT_C, RbfParams, VALARO,
                  train_chained, train_smo)
from .wavelet import SYMMETRIC

INDEPENDENT = "independent"
DEPENDENT = "dependent"

DEFAULT_K = {INDEPENDENT: 6, DEPENDENT: 8}

VALENCE = "valence"
AROUSAL = "arousal"


@dataclass(frozen=True)
class FoldPlan:
    """Sample-to-fold assignment; per-fold class counts are within one
    sample of perfect proportionality."""

    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle followed by per-class round-robin assignment."""
    labels = list(labels)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(labels))
    by_class: dict = {}
    for pos in order:
        by_class.setdefault(labels[pos], []).append(pos)
    assignments = np.empty(len(labels), dtype=np.int64)
    for cls, members in by_class.items():
        if len(members) < k:
            raise ValueError(
                f"class {getattr(cls, 'value', cls)} has {len(members)} "
                f"samples, need at least {k} for {k}-fold CV")
        start = int(rng.integers(k))
        for pos, sample in enumerate(members):
            assignments[sample] = (start + pos) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def accuracy(pred, truth) -> float:
    """Fraction of exact matches."""
    pred = list(pred)
    truth = list(truth)
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if not pred:
        raise ValueError("cannot score empty label lists")
    return sum(p == t for p, t in zip(pred, truth)) / len(pred)


def stratified_subsample(labels, fraction: float, seed: int) -> np.ndarray:
    """Seeded index subsample preserving class proportions."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    by_class: dict = {}
    for idx, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(idx)
    keep: list[int] = []
    for members in by_class.values():
        members = np.array(members)
        rng.shuffle(members)
        take = max(1, round(fraction * len(members)))
        keep.extend(members[:take])
    return np.sort(np.array(keep))


@dataclass(frozen=True)
class ModelSpec:
    """What to train inside each fold."""

    kind: str = "svm"  # "svm" | "valaro" | "aroval"
    params: RbfParams = field(
        default_factory=lambda: RbfParams(C=DEFAULT_C, gamma=GAMMA_SCALE))
    tol: float = 1e-3
    standardize: bool = True

    def __post_init__(self):
        if self.kind not in ("svm", VALARO, AROVAL):
            raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass
class ExperimentReport:
    """Per-fold and aggregate accuracies for one configuration."""

    model: str
    k: int
    seed: int
    per_fold_accuracy: list[float]
    mean: float
    stddev: float
    target: str | None = None
    mode: str | None = None
    channels: int | None = None
    tau_s: int | None = None
    baseline_removed: bool | None = None
    per_subject: dict[int, float] | None = None


def _fold_predictions(model_kind, model, X_test, target):
    from .svm import ChainedModel

    if model_kind == "svm":
        dv = model.decision_values(X_test)
        return [Label.HIGH if d > 0 else Label.LOW for d in dv]
    assert isinstance(model, ChainedModel)
    dv1 = model.first.decision_values(X_test)
    cond = (dv1 > 0).astype(np.float64)
    dv2 = model.second.decision_values(np.hstack([X_test, cond[:, None]]))
    first_dim = AROUSAL if model.direction == VALARO else VALENCE
    dv = dv1 if target == first_dim else dv2
    return [Label.HIGH if d > 0 else Label.LOW for d in dv]


def cross_validate(X, y, spec: ModelSpec, k: int, seed: int,
                   y_other=None, target: str | None = None,
                   groups=None) -> ExperimentReport:
    """Stratified k-fold evaluation.

    Standardization and models are fitted on the training portion of each
    fold only. For chained specs ``y`` is the reported target and
    ``y_other`` the companion dimension; ``target`` names which one ``y``
    is. With ``groups`` set, whole groups (trials) are assigned to folds.
    """
    X = np.asarray(X, dtype=np.float64)
    y = list(y)
    if spec.kind != "svm":
        if y_other is None or target not in (VALENCE, AROUSAL):
            raise ValueError(
                "chained evaluation needs y_other and an explicit target")
        y_other = list(y_other)
    if groups is None:
        plan = stratified_kfold(y, k, seed)
        assignments = plan.assignments
    else:
        groups = np.asarray(groups)
        uniq = list(dict.fromkeys(groups.tolist()))
        group_label = {}
        for g in uniq:
            labs = {y[i] for i in np.flatnonzero(groups == g)}
            if len(labs) != 1:
                raise ValueError(f"group {g} mixes labels; cannot stratify")
            group_label[g] = labs.pop()
        plan = stratified_kfold([group_label[g] for g in uniq], k, seed)
        fold_of_group = dict(zip(uniq, plan.assignments))
        assignments = np.array([fold_of_group[g] for g in groups])
    per_fold = []
    for fold in range(k):
        train_idx = np.flatnonzero(assignments != fold)
        test_idx = np.flatnonzero(assignments == fold)
        y_train = [y[i] for i in train_idx]
        try:
            if spec.kind == "svm":
                model = train_smo(X[train_idx], y_train, spec.params,
                                  tol=spec.tol, standardize=spec.standardize)
            else:
                other_train = [y_other[i] for i in train_idx]
                if spec.kind == VALARO:
                    y_aro, y_val = ((y_train, other_train)
                                    if target == AROUSAL
                                    else (other_train, y_train))
                    model = train_chained(X[train_idx], y_val, y_aro, VALARO,
                                          params=spec.params, tol=spec.tol,
                                          standardize=spec.standardize)
                else:
                    y_val, y_aro = ((y_train, other_train)
                                    if target == VALENCE
                                    else (other_train, y_train))
                    model = train_chained(X[train_idx], y_val, y_aro, AROVAL,
                                          params=spec.params, tol=spec.tol,
                                          standardize=spec.standardize)
        except Exception as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
        pred = _fold_predictions(spec.kind, model, X[test_idx], target)
        per_fold.append(accuracy(pred, [y[i] for i in test_idx]))
    return ExperimentReport(model=spec.kind, k=k, seed=seed,
                            per_fold_accuracy=per_fold,
                            mean=float(np.mean(per_fold)),
                            stddev=float(np.std(per_fold)),
                            target=target)


@dataclass(frozen=True)
class ExperimentConfig:
    """One row of the experiment matrix."""

    target: str                  # "valence" | "arousal"
    mode: str                    # "independent" | "dependent"
    channels: int                # 5 | 32
    tau_s: int                   # 1 | 3
    baseline_removed: bool
    model: str = "svm"           # "svm" | "valaro" | "aroval"
    k: int | None = None
    C: float = DEFAULT_C
    gamma: float | str = GAMMA_SCALE
    standardize: bool = True
    tol: float = 1e-3
    seed: int = 0
    grouped_trials: bool = False  # keep a trial's windows in one fold
    boundary_mode: str = SYMMETRIC

    def __post_init__(self):
        if self.target not in (VALENCE, AROUSAL):
            raise ValueError(f"target must be valence or arousal, "
                             f"got {self.target!r}")
        if self.mode not in (INDEPENDENT, DEPENDENT):
            raise ValueError(f"mode must be independent or dependent, "
                             f"got {self.mode!r}")
        if self.channels not in (5, 32):
            raise ValueError(f"channels must be 5 or 32, got {self.channels}")

    @property
    def folds(self) -> int:
        return self.k if self.k is not None else DEFAULT_K[self.mode]


def build_dataset(recordings, channels: int, tau_s: int,
                  baseline_removed: bool, boundary_mode: str = SYMMETRIC):
    """Window-level design matrix plus per-window labels and provenance.

    Returns (X, y_valence, y_arousal, subject_ids, trial_keys); windows
    inherit their trial's binarized ratings.
    """
    rows, y_val, y_aro, subjects, trials = [], [], [], [], []
    for rec in recordings:
        if channels == 5 and rec.n_channels != 5:
            rec = select_channels(rec, CHANNELS_5)
        elif rec.n_channels != channels:
            raise ValueError(
                f"subject {rec.subject_id} trial {rec.trial_id} has "
                f"{rec.n_channels} channels, config wants {channels}")
        feats = trial_feature_matrix(rec, tau_s,
                                     baseline_removed=baseline_removed,
                                     mode=boundary_mode)
        lab_v = binarize_rating(rec.ratings.valence)
        lab_a = binarize_rating(rec.ratings.arousal)
        trial_key = rec.subject_id * 1_000_000 + rec.trial_id
        for row in feats:
            rows.append(row)
            y_val.append(lab_v)
            y_aro.append(lab_a)
            subjects.append(rec.subject_id)
            trials.append(trial_key)
    if not rows:
        raise ValueError("no recordings supplied")
    return (np.array(rows), y_val, y_aro, np.array(subjects),
            np.array(trials))


def run_experiment(recordings, cfg: ExperimentConfig) -> ExperimentReport:
    """Evaluate one configuration.

    Independent mode pools all subjects' windows into a single CV;
    dependent mode cross-validates per subject and aggregates the
    across-subject mean and population stddev of subject means.
    """
    X, y_val, y_aro, subjects, trial_keys = build_dataset(
        recordings, cfg.channels, cfg.tau_s, cfg.baseline_removed,
        cfg.boundary_mode)
    y = y_val if cfg.target == VALENCE else y_aro
    y_other = y_aro if cfg.target == VALENCE else y_val
    spec = ModelSpec(kind=cfg.model,
                     params=RbfParams(C=cfg.C, gamma=cfg.gamma),
                     tol=cfg.tol, standardize=cfg.standardize)
    k = cfg.folds
    groups = trial_keys if cfg.grouped_trials else None
    if cfg.mode == INDEPENDENT:
        report = cross_validate(X, y, spec, k, cfg.seed, y_other=y_other,
                                target=cfg.target, groups=groups)
        return replace(report, target=cfg.target, mode=cfg.mode,
                       channels=cfg.channels, tau_s=cfg.tau_s,
                       baseline_removed=cfg.baseline_removed)
    per_subject: dict[int, float] = {}
    all_folds: list[float] = []
    for subject in sorted(set(subjects.tolist())):
        mask = subjects == subject
        y_s = [y[i] for i in np.flatnonzero(mask)]
        counts: dict = {}
        for lab in y_s:
            counts[lab] = counts.get(lab, 0) + 1
        for lab, count in counts.items():
            if count < k:
                raise ValueError(
                    f"subject {subject}: class {lab.value} has only "
                    f"{count} windows, need at least {k} for {k}-fold CV")
        y_other_s = [y_other[i] for i in np.flatnonzero(mask)]
        sub_groups = trial_keys[mask] if cfg.grouped_trials else None
        rep = cross_validate(X[mask], y_s, spec, k, cfg.seed + subject,
                             y_other=y_other_s, target=cfg.target,
                             groups=sub_groups)
        per_subject[subject] = rep.mean
        all_folds.extend(rep.per_fold_accuracy)
    means = np.array(list(per_subject.values()))
    return ExperimentReport(model=cfg.model, k=k, seed=cfg.seed,
                            per_fold_accuracy=all_folds,
                            mean=float(means.mean()),
                            stddev=float(means.std()),
                            target=cfg.target, mode=cfg.mode,
                            channels=cfg.channels, tau_s=cfg.tau_s,
                            baseline_removed=cfg.baseline_removed,
                            per_subject=per_subject)


def format_report(report: ExperimentReport) -> str:
    """Render one record of the structured report format.

    Floats use shortest round-trip formatting, so parsing a report
    recovers the exact stored values.
    """
    lines = ["[experiment]"]
    for name, value in (("target", report.target), ("mode", report.mode),
                        ("channels", report.channels),
                        ("tau_s", report.tau_s),
                        ("baseline_removed", report.baseline_removed)):
        if value is not None:
            rendered = str(value).lower() if isinstance(value, bool) \
                else str(value)
            lines.append(f"{name} = {rendered}")
    lines.append(f"model = {report.model}")
    lines.append(f"k = {report.k}")
    lines.append(f"seed = {report.seed}")
    lines.append("per_fold_accuracy = "
                 + " ".join(repr(a) for a in report.per_fold_accuracy))
    lines.append(f"mean = {report.mean!r}")
    lines.append(f"stddev = {report.stddev!r}")
    if report.per_subject is not None:
        lines.append("per_subject = " + " ".join(
            f"{sid}:{acc!r}" for sid, acc in sorted(report.per_subject.items())))
    return "\n".join(lines) + "\n"


def write_reports(reports, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for idx, report in enumerate(reports):
            if idx:
                fh.write("\n")
            fh.write(format_report(report))


def parse_reports(path) -> list[ExperimentReport]:
    """Read back a report file written by :func:`write_reports`."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    reports = []
    for block in text.split("[experiment]"):
        fields: dict[str, str] = {}
        for line in block.strip().splitlines():
            if "=" in line:
                key, _, value = line.partition("=")
                fields[key.strip()] = value.strip()
        if not fields:
            continue
        per_subject = None
        if "per_subject" in fields:
            per_subject = {}
            for item in fields["per_subject"].split():
                sid, _, acc = item.partition(":")
                per_subject[int(sid)] = float(acc)
        reports.append(ExperimentReport(
            model=fields["model"], k=int(fields["k"]),
            seed=int(fields["seed"]),
            per_fold_accuracy=[float(a)
                               for a in fields["per_fold_accuracy"].split()],
            mean=float(fields["mean"]), stddev=float(fields["stddev"]),
            target=fields.get("target"), mode=fields.get("mode"),
            channels=int(fields["channels"]) if "channels" in fields else None,
            tau_s=int(fields["tau_s"]) if "tau_s" in fields else None,
            baseline_removed=(fields["baseline_removed"] == "true")
            if "baseline_removed" in fields else None,
            per_subject=per_subject))
    return reports
