"""convert() and verify(): archive -> canonical-raw, and integrity report."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .archives import DATASETS, LOADERS, ArchiveDescriptor
from .errors import MalformedFileError
from .mirw import read_manifest, read_mirw, write_layout


def convert(desc: ArchiveDescriptor, out_dir) -> dict:
    """Convert the selected slice of an archive to canonical-raw.

    A subject whose source files are all missing is recorded in the
    manifest as absent and conversion continues; a file that exists but
    does not parse aborts with an error naming it.  Returns a summary
    dict (subjects converted / absent, recordings written).
    """
    spec = desc.spec
    loader = LOADERS[desc.kind]
    wanted = [(name, tag) for name, tag in spec.sessions
              if name in desc.sessions]
    recordings, absent = [], []
    for subject in desc.subjects:
        found = []
        for session_name, source_tag in wanted:
            try:
                found.append(loader(desc.source, subject, session_name,
                                    source_tag))
            except FileNotFoundError:
                continue
        if not found:
            absent.append(subject)
            continue
        recordings.extend(found)
    if not recordings:
        raise MalformedFileError(
            f"{desc.source}: no {desc.kind} source files found")
    write_layout(recordings, out_dir, dataset=desc.kind,
                 event_map=spec.event_map, class_names=spec.class_names,
                 absent_subjects=absent)
    return {
        "kind": desc.kind,
        "subjects": sorted({r.subject_id for r in recordings}),
        "absent": absent,
        "recordings": len(recordings),
    }


# ---------------------------------------------------------------------------
# verification

@dataclass
class Report:
    rows: list = field(default_factory=list)  # (name, status, detail)
    passed: bool = True

    def add(self, name, ok, detail=""):
        self.rows.append((name, "PASS" if ok else "FAIL", detail))
        self.passed &= bool(ok)

    def info(self, name, detail):
        self.rows.append((name, "INFO", detail))

    def render(self) -> str:
        width = max((len(r[0]) for r in self.rows), default=10)
        lines = [f"{name:<{width}}  {status:<4}  {detail}".rstrip()
                 for name, status, detail in self.rows]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def verify(out_dir) -> Report:
    """Check a converted directory: checksums, channel sets, event counts.

    Structural problems (bad checksum, channel drift, missing files,
    empty directory) fail the report.  Reference figures for the known
    archives (subject roster, native rate, channel count and montage,
    trials per subject) are enforced only when the directory holds the
    complete roster; partial conversions report them as INFO.
    """
    report = Report()
    out = Path(out_dir)
    try:
        manifest = read_manifest(out)
    except Exception as exc:
        report.add("manifest", False, str(exc))
        report.add("subjects", False, "0 subjects found")
        return report

    subjects = manifest.get("subjects", [])
    absent = manifest.get("absent_subjects", [])
    report.add("subjects", len(subjects) > 0,
               f"{len(subjects)} present, {len(absent)} absent")
    if absent:
        report.info("absent", ", ".join(str(s) for s in absent))

    names = manifest.get("channel_names", [])
    event_map = {int(k): v for k, v in manifest.get("event_map", {}).items()}
    class_counts = {c: 0 for c in manifest.get("class_names", [])}
    per_subject_mi = {}

    for sub in subjects:
        sid = sub["id"]
        for item in sub["recordings"]:
            tag = f"subject {sid:03d} {item['session']}"
            path = out / item["file"]
            if not path.exists():
                report.add(tag, False, f"{item['file']} missing")
                continue
            raw = path.read_bytes()
            if zlib.crc32(raw) & 0xFFFFFFFF != item["crc32"]:
                report.add(tag, False, "checksum mismatch")
                continue
            rec = read_mirw(path, subject_id=sid, session=item["session"])
            problems = []
            missing = [c for c in names if c not in rec.channel_names]
            extra = [c for c in rec.channel_names if c not in names]
            if missing:
                problems.append("missing channel " + ", ".join(missing))
            if extra:
                problems.append("unexpected channel " + ", ".join(extra))
            if rec.fs != item["fs"]:
                problems.append(f"fs {rec.fs} != manifest {item['fs']}")
            if rec.samples.shape[1] != item["n_samples"]:
                problems.append("sample count differs from manifest")
            if len(rec.events) != item["n_events"]:
                problems.append("event count differs from manifest")
            mi = sum(1 for _, code in rec.events if code in event_map)
            for _, code in rec.events:
                if code in event_map:
                    class_counts[event_map[code]] += 1
            per_subject_mi[sid] = per_subject_mi.get(sid, 0) + mi
            report.add(tag, not problems,
                       "; ".join(problems) if problems
                       else f"{len(rec.events)} events, {mi} class-mapped")

    if per_subject_mi:
        counts = ", ".join(f"{c}={n}" for c, n in class_counts.items())
        report.info("trials", f"per class: {counts}; per subject: "
                    + ", ".join(f"{s}:{n}"
                                for s, n in sorted(per_subject_mi.items())))
        report.add("classes", all(n > 0 for n in class_counts.values()),
                   "every class has mapped events" if
                   all(n > 0 for n in class_counts.values())
                   else "a class has zero mapped events")

    spec = DATASETS.get(manifest.get("dataset"))
    if spec is not None:
        full = len(subjects) + len(absent) == spec.n_subjects and not absent
        check = report.add if full else (
            lambda name, ok, detail="": report.info(
                name, f"{detail} [{'ok' if ok else 'differs'}; partial "
                      f"archive, not enforced]"))
        check("roster", len(subjects) == spec.n_subjects,
              f"{len(subjects)}/{spec.n_subjects} subjects")
        fss = {item["fs"] for sub in subjects for item in sub["recordings"]}
        check("native-rate", fss == {spec.fs}, f"fs {sorted(fss)}")
        check("channel-count", len(names) == spec.n_channels,
              f"{len(names)}/{spec.n_channels} channels")
        if spec.required_channels:
            lacking = [c for c in spec.required_channels if c not in names]
            check("montage", not lacking,
                  "all motor-cortex electrodes present" if not lacking
                  else "missing " + ", ".join(lacking))
        if per_subject_mi:
            bad = {s: n for s, n in per_subject_mi.items()
                   if n != spec.mi_trials_per_subject}
            check("trial-count",
                  not bad, f"{spec.mi_trials_per_subject} MI trials/subject"
                  if not bad else f"off-count subjects {bad}")
    return report
