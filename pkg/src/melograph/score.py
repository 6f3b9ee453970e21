"""MusicXML ingestion into note matrices.

Only uncompressed partwise MusicXML is read. Onsets and durations are kept
as exact fractions of a quarter note; they are rendered as decimals in the
CSV interchange format.
"""
from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .errors import EmptyScoreError, ScoreParseError, UnsupportedFeatureError

STEP_TO_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

CSV_COLUMNS = (
    "onset_global",
    "onset_measure",
    "duration",
    "midi_pitch",
    "pitch_class",
    "octave",
    "beat_strength",
    "ir_symbol",
)

MIN_BEAT_STRENGTH = Fraction(1, 16)
MAX_TUPLET_DEPTH = 2


@dataclass(frozen=True)
class NoteEvent:
    onset_global: Fraction
    onset_in_measure: Fraction
    duration: Fraction
    midi_pitch: int
    beat_strength: Fraction
    ir_symbol: str | None = None

    @property
    def pitch_class(self) -> int:
        return self.midi_pitch % 12

    @property
    def octave(self) -> int:
        return self.midi_pitch // 12 - 1

    @property
    def offset(self) -> Fraction:
        return self.onset_global + self.duration


@dataclass
class NoteMatrix:
    piece_id: str
    composer: str
    events: list[NoteEvent]
    divisions: int = 1
    time_signatures: list[tuple[int, int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def pitches(self) -> list[int]:
        return [e.midi_pitch for e in self.events]

    def with_events(self, events: list[NoteEvent]) -> "NoteMatrix":
        return replace(self, events=list(events))


# -- metric weight -----------------------------------------------------------

def _prime_factors(n: int) -> list[int]:
    out = []
    p = 2
    while n > 1 and p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return sorted(out, reverse=True)


def metric_divisions(numerator: int, denominator: int) -> list[int]:
    """Successive split factors of one measure, coarsest first.

    Compound meters (6/8, 9/8, 12/8) split into dotted beats, then into
    three; everything below is binary.
    """
    if numerator % 3 == 0 and numerator > 3:
        top = _prime_factors(numerator // 3) + [3]
    else:
        top = _prime_factors(numerator)
    return top + [2] * 8


def measure_length(time_signature: tuple[int, int]) -> Fraction:
    num, den = time_signature
    return Fraction(4 * num, den)


def beat_strength(onset_in_measure, time_signature: tuple[int, int]) -> Fraction:
    """Metric weight of a position inside a measure.

    The downbeat weighs 1; every level of the metric hierarchy halves the
    weight. Positions off the grid, or deeper than sixteenth level, get 1/16.
    """
    onset = Fraction(onset_in_measure)
    length = measure_length(time_signature)
    if onset < 0 or onset >= length:
        raise ValueError(
            f"onset {onset} outside measure of length {length} "
            f"({time_signature[0]}/{time_signature[1]})"
        )
    grid = length
    weight = Fraction(1)
    for split in metric_divisions(*time_signature):
        if onset % grid == 0:
            return weight
        if weight <= MIN_BEAT_STRENGTH:
            break
        grid /= split
        weight /= 2
    return MIN_BEAT_STRENGTH


# -- parsing -----------------------------------------------------------------

def _load_root(document) -> ET.Element:
    try:
        return ET.fromstring(document)
    except ET.ParseError as err:
        line, column = err.position
        text = document.decode("utf-8", "replace") if isinstance(document, bytes) else document
        lines = text.splitlines()
        context = lines[line - 1] if 0 < line <= len(lines) else None
        raise ScoreParseError("malformed MusicXML", line, column, context) from None


def _fraction(text: str | None, what: str) -> Fraction:
    if text is None:
        raise ScoreParseError(f"missing <{what}>")
    try:
        return Fraction(text.strip())
    except ValueError:
        raise ScoreParseError(f"bad <{what}> value {text!r}") from None


def _midi_from_pitch(pitch: ET.Element) -> int:
    step = (pitch.findtext("step") or "").strip().upper()
    if step not in STEP_TO_PC:
        raise ScoreParseError(f"bad pitch step {step!r}")
    alter = pitch.findtext("alter")
    alter_val = int(round(float(alter))) if alter else 0
    octave = int(_fraction(pitch.findtext("octave"), "octave"))
    midi = (octave + 1) * 12 + STEP_TO_PC[step] + alter_val
    if not 0 <= midi <= 127:
        raise ScoreParseError(f"pitch out of MIDI range: {midi}")
    return midi


def _time_signature(time_el: ET.Element) -> tuple[int, int]:
    beats = time_el.findtext("beats")
    beat_type = time_el.findtext("beat-type")
    if beats is None or beat_type is None:
        raise UnsupportedFeatureError("time", "time signature without beats/beat-type")
    num = sum(int(b) for b in beats.split("+"))
    return num, int(beat_type)


@dataclass
class _Pending:
    onset: Fraction
    onset_in_measure: Fraction
    duration: Fraction
    midi: int
    measure: int


def _read_part(part: ET.Element):
    divisions: int | None = None
    first_divisions: int | None = None
    ts = (4, 4)
    time_sigs: list[tuple[int, int, int]] = []
    notes: list[_Pending] = []
    measure_info: list[tuple[Fraction, tuple[int, int], bool]] = []
    open_ties: dict[tuple[str, int], int] = {}
    open_tuplets: set[str] = set()
    measure_start = Fraction(0)

    for m_index, measure in enumerate(part.findall("measure")):
        pos = measure_start
        furthest = measure_start
        last_onset = measure_start
        for el in measure:
            tag = el.tag
            if tag == "attributes":
                div_text = el.findtext("divisions")
                if div_text is not None:
                    divisions = int(_fraction(div_text, "divisions"))
                    if first_divisions is None:
                        first_divisions = divisions
                time_el = el.find("time")
                if time_el is not None:
                    ts = _time_signature(time_el)
                    time_sigs.append((m_index, ts[0], ts[1]))
            elif tag in ("backup", "forward"):
                if divisions is None:
                    raise ScoreParseError(f"<{tag}> before <divisions>")
                step = _fraction(el.findtext("duration"), "duration") / divisions
                pos = pos - step if tag == "backup" else pos + step
                if pos < measure_start:
                    raise ScoreParseError(f"<backup> moves before start of measure {m_index}")
            elif tag == "note":
                if el.find("grace") is not None:
                    continue
                if divisions is None:
                    raise ScoreParseError("<note> before <divisions>")
                for tup in el.findall("notations/tuplet"):
                    if tup.get("type") == "start":
                        open_tuplets.add(tup.get("number", "1"))
                if len(open_tuplets) > MAX_TUPLET_DEPTH:
                    raise UnsupportedFeatureError(
                        "tuplet", f"nesting depth {len(open_tuplets)} exceeds {MAX_TUPLET_DEPTH}"
                    )
                dur = _fraction(el.findtext("duration"), "duration") / divisions
                is_chord = el.find("chord") is not None
                onset = last_onset if is_chord else pos
                pitch = el.find("pitch")
                if pitch is not None and dur > 0:
                    midi = _midi_from_pitch(pitch)
                    key = (el.findtext("voice", "1").strip(), midi)
                    tie_types = {t.get("type") for t in el.findall("tie")}
                    if "stop" in tie_types and key in open_ties:
                        held = notes[open_ties[key]]
                        held.duration += dur
                        if "start" not in tie_types:
                            del open_ties[key]
                    else:
                        notes.append(_Pending(onset, onset - measure_start, dur, midi, m_index))
                        if "start" in tie_types:
                            open_ties[key] = len(notes) - 1
                if not is_chord:
                    last_onset = pos
                    pos += dur
                for tup in el.findall("notations/tuplet"):
                    if tup.get("type") == "stop":
                        open_tuplets.discard(tup.get("number", "1"))
            furthest = max(furthest, pos)
        actual = furthest - measure_start
        nominal = measure_length(ts)
        pickup = m_index == 0 and 0 < actual < nominal
        measure_info.append((actual, ts, pickup))
        measure_start = furthest

    events = []
    for n in notes:
        _, meter, pickup = measure_info[n.measure]
        nominal = measure_length(meter)
        # pickup notes sit at the end of the full meter
        position = n.onset_in_measure + (nominal - measure_info[n.measure][0] if pickup else 0)
        weight = beat_strength(position, meter) if position < nominal else MIN_BEAT_STRENGTH
        events.append(NoteEvent(n.onset, n.onset_in_measure, n.duration, n.midi, weight))
    return events, first_divisions, time_sigs


def parse_musicxml(
    document,
    piece_id: str = "",
    composer: str = "",
    part: str | None = None,
    melody: str | None = "highest",
) -> NoteMatrix:
    """Parse a partwise MusicXML document into a note matrix.

    ``part`` restricts reading to one part id. ``melody`` is passed to
    :func:`select_melody`; ``None`` returns every pitched note.
    """
    root = _load_root(document)
    if root.tag == "score-timewise":
        raise UnsupportedFeatureError("score-timewise", "only partwise scores are supported")
    if root.tag != "score-partwise":
        raise ScoreParseError(f"root element <{root.tag}> is not <score-partwise>")
    parts = root.findall("part")
    if part is not None:
        parts = [p for p in parts if p.get("id") == part]
        if not parts:
            raise ScoreParseError(f"no part with id {part!r}")

    events: list[NoteEvent] = []
    divisions = None
    time_sigs: list[tuple[int, int, int]] = []
    for p in parts:
        part_events, part_div, part_ts = _read_part(p)
        events.extend(part_events)
        divisions = divisions or part_div
        for entry in part_ts:
            if entry not in time_sigs:
                time_sigs.append(entry)
    if not events:
        raise EmptyScoreError(f"no pitched notes in score {piece_id or '<unnamed>'}")

    events.sort(key=lambda e: (e.onset_global, e.midi_pitch))
    matrix = NoteMatrix(piece_id, composer, events, divisions or 1, sorted(time_sigs))
    if melody is not None:
        matrix = select_melody(matrix, melody)
    return matrix


def parse_musicxml_file(path, **kwargs) -> NoteMatrix:
    path = Path(path)
    if path.suffix.lower() == ".mxl":
        raise UnsupportedFeatureError("mxl", "compressed MusicXML is not supported")
    kwargs.setdefault("piece_id", path.stem)
    return parse_musicxml(path.read_bytes(), **kwargs)


def select_melody(matrix: NoteMatrix, rule: str = "highest") -> NoteMatrix:
    """Reduce simultaneous onsets to one note (highest or lowest pitch)."""
    if rule not in ("highest", "lowest"):
        raise ValueError(f"unknown melody rule {rule!r}")
    by_onset: dict[Fraction, NoteEvent] = {}
    for ev in matrix.events:
        cur = by_onset.get(ev.onset_global)
        if cur is None:
            by_onset[ev.onset_global] = ev
        elif (ev.midi_pitch > cur.midi_pitch) == (rule == "highest"):
            by_onset[ev.onset_global] = ev
    kept = sorted(by_onset.values(), key=lambda e: (e.onset_global, e.midi_pitch))
    return matrix.with_events(kept)


# -- CSV interchange ---------------------------------------------------------

def format_beats(value: Fraction, min_places: int = 2) -> str:
    value = Fraction(value)
    for places in range(min_places, 9):
        if (value * 10**places).denominator == 1:
            return f"{float(value):.{places}f}"
    return f"{float(value):.9f}"


def parse_beats(text: str) -> Fraction:
    value = Fraction(text)
    if "." in text and len(text.split(".")[1]) >= 9:
        # rounded non-terminating value, e.g. a triplet onset
        value = value.limit_denominator(10_000)
    return value


def write_csv(matrix: NoteMatrix, target=None) -> str:
    """Write the per-note CSV. Returns the text; also writes it if a path is given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for ev in matrix.events:
        writer.writerow([
            format_beats(ev.onset_global),
            format_beats(ev.onset_in_measure),
            format_beats(ev.duration),
            ev.midi_pitch,
            ev.pitch_class,
            ev.octave,
            format_beats(ev.beat_strength, 3),
            ev.ir_symbol or "",
        ])
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def read_csv(source, piece_id: str = "", composer: str = "") -> NoteMatrix:
    """Read a CSV written by ``write_csv``. ``source`` is a path or the CSV text itself."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ScoreParseError(f"unexpected CSV header {reader.fieldnames}")
    events = []
    for row in reader:
        midi = int(row["midi_pitch"])
        ev = NoteEvent(
            parse_beats(row["onset_global"]),
            parse_beats(row["onset_measure"]),
            parse_beats(row["duration"]),
            midi,
            parse_beats(row["beat_strength"]),
            row["ir_symbol"] or None,
        )
        if ev.pitch_class != int(row["pitch_class"]) or ev.octave != int(row["octave"]):
            raise ScoreParseError(f"pitch class/octave inconsistent with MIDI {midi}")
        events.append(ev)
    return NoteMatrix(piece_id, composer, events)
