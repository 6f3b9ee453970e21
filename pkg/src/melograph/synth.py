"""Synthetic corpora with planted styles.

Each style has two contrasting themes built from one contour archetype: a
low theme with narrow intervals and a higher one with wide intervals. A piece
alternates blocks of phrases between the themes, with per-piece transposition
and light ornamentation, and separates clangs and phrases by rests so the
segmenter has something to find.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

PC_NAMES = [("C", 0), ("C", 1), ("D", 0), ("D", 1), ("E", 0), ("F", 0),
            ("F", 1), ("G", 0), ("G", 1), ("A", 0), ("A", 1), ("B", 0)]

# Each archetype has interval cycles (semitones, ordered from narrow to wide)
# and note values (beats). The contour type, and so the I-R symbols it yields,
# is characteristic of the archetype; interval size, and so expectancy, varies
# between motifs.
ARCHETYPES = [
    {"name": "stepwise", "cycles": [[1], [2], [1, 2], [3], [4, 5]], "turn": 0.15,
     "durations": [0.5], "center": 72},
    {"name": "leaping", "cycles": [[7], [7, 10], [9], [10], [12]], "turn": 0.9,
     "durations": [1.0, 0.5], "center": 60},
    {"name": "repeating", "cycles": [[0, 0, 1], [0, 0, 2], [0, 0, 3], [0, 4], [0, 5]], "turn": 0.5,
     "durations": [0.25, 0.25, 0.75], "center": 79},
    {"name": "arpeggio", "cycles": [[3, 7], [4, 8], [3, 8], [4, 9], [5, 9]], "turn": 0.2,
     "durations": [0.5, 0.5, 1.0], "center": 52},
    {"name": "zigzag", "cycles": [[1, 2], [2], [2, 3], [3], [4]], "turn": 1.0,
     "durations": [0.75, 0.25], "center": 66},
]


@dataclass
class SynthNote:
    onset: Fraction
    duration: Fraction
    midi: int | None  # None is a rest


@dataclass
class SynthPiece:
    piece_id: str
    composer: str
    notes: list[SynthNote]


def _motif(arch: dict, cycles: list, rng: np.random.Generator) -> list[tuple[int, Fraction]]:
    """Relative pitches and durations of one motif."""
    length = int(rng.integers(4, 7))
    cycle = cycles[int(rng.integers(len(cycles)))]
    pitch, direction = 0, 1 if rng.random() < 0.5 else -1
    out = []
    for i in range(length):
        dur = Fraction(str(arch["durations"][int(rng.integers(len(arch["durations"])))]))
        out.append((pitch, dur))
        if rng.random() < arch["turn"]:
            direction = -direction
        pitch += direction * cycle[i % len(cycle)]
    return out


@dataclass
class _Theme:
    motifs: list
    templates: list  # each template is a list of motif indices
    offset: int      # register offset from the style centre


def _style_themes(arch: dict, rng: np.random.Generator, motifs: int, templates: int,
                  theme_shift: int) -> list[_Theme]:
    """Two contrasting themes: narrow intervals low, wide intervals high."""
    themes = []
    for t, cycles in enumerate((arch["cycles"][:3], arch["cycles"][2:])):
        ms = [_motif(arch, cycles, rng) for _ in range(motifs)]
        ts = [[int(m) for m in rng.integers(motifs, size=int(rng.integers(2, 4)))] for _ in range(templates)]
        themes.append(_Theme(ms, ts, t * theme_shift))
    return themes


def generate_corpus(pieces: int = 10, styles: int = 5, seed: int = 0, phrases: int = 24,
                    motifs_per_theme: int = 2, templates_per_theme: int = 2,
                    theme_shift: int = 5, block: int = 4,
                    ornament_rate: float = 0.1) -> list[SynthPiece]:
    """``pieces`` pieces spread round-robin over ``styles`` styles.

    A style owns two contrasting themes, each a few motifs and phrase
    templates (short motif sequences). A piece alternates blocks of ``block``
    phrases between the themes, restating templates in random order with small
    transpositions and occasional ornaments. Clangs are separated by one beat
    of rest and phrases by three.
    """
    if styles < 1 or pieces < styles:
        raise ValueError("need at least one piece per style")
    rng = np.random.default_rng(seed)
    style_themes = [
        _style_themes(ARCHETYPES[s % len(ARCHETYPES)], rng, motifs_per_theme, templates_per_theme, theme_shift)
        for s in range(styles)
    ]

    out = []
    for p in range(pieces):
        s = p % styles
        arch = ARCHETYPES[s % len(ARCHETYPES)]
        variant = p // styles
        prng = np.random.default_rng([seed, p])
        center = arch["center"] + 12 * ((s // len(ARCHETYPES)) % 2) + int(prng.integers(-2, 3))
        notes: list[SynthNote] = []
        t = Fraction(0)
        for ph in range(phrases):
            theme = style_themes[s][(ph // block) % 2]
            template = theme.templates[int(prng.integers(len(theme.templates)))]
            for c, m_idx in enumerate(template):
                shift = center + theme.offset + int(prng.choice([-2, 0, 0, 2, 3]))
                for rel, dur in theme.motifs[m_idx]:
                    midi = int(np.clip(shift + rel, 24, 108))
                    if prng.random() < ornament_rate:
                        # ornament: split the note with an upper neighbour
                        half = dur / 2
                        notes.append(SynthNote(t, half, midi))
                        notes.append(SynthNote(t + half, half, min(midi + 2, 108)))
                    else:
                        notes.append(SynthNote(t, dur, midi))
                    t += dur
                rest = Fraction(1) if c < len(template) - 1 else Fraction(3)
                notes.append(SynthNote(t, rest, None))
                t += rest
        out.append(SynthPiece(f"s{s}_v{variant}", f"style{s}", notes))
    return out


# -- MusicXML writer ---------------------------------------------------------

def _duration_split(onset: Fraction, duration: Fraction, measure: Fraction):
    """Split a note at barlines: yields (onset, duration) parts."""
    end = onset + duration
    while onset < end:
        bar_end = (onset // measure + 1) * measure
        part_end = min(end, bar_end)
        yield onset, part_end - onset
        onset = part_end


def to_musicxml(piece: SynthPiece, divisions: int = 8, time_signature=(4, 4)) -> str:
    measure_len = Fraction(4 * time_signature[0], time_signature[1])
    root = ET.Element("score-partwise", version="3.1")
    work = ET.SubElement(root, "work")
    ET.SubElement(work, "work-title").text = piece.piece_id
    ident = ET.SubElement(root, "identification")
    ET.SubElement(ident, "creator", type="composer").text = piece.composer
    part_list = ET.SubElement(root, "part-list")
    sp = ET.SubElement(part_list, "score-part", id="P1")
    ET.SubElement(sp, "part-name").text = "Melody"
    part = ET.SubElement(root, "part", id="P1")

    parts_by_measure: dict[int, list] = {}
    for note in piece.notes:
        chunks = list(_duration_split(note.onset, note.duration, measure_len))
        for idx, (on, dur) in enumerate(chunks):
            tie = []
            if note.midi is not None and len(chunks) > 1:
                if idx > 0:
                    tie.append("stop")
                if idx < len(chunks) - 1:
                    tie.append("start")
            parts_by_measure.setdefault(int(on // measure_len), []).append((dur, note.midi, tie))

    n_measures = max(parts_by_measure) + 1 if parts_by_measure else 1
    for m in range(n_measures):
        measure = ET.SubElement(part, "measure", number=str(m + 1))
        if m == 0:
            attrs = ET.SubElement(measure, "attributes")
            ET.SubElement(attrs, "divisions").text = str(divisions)
            time_el = ET.SubElement(attrs, "time")
            ET.SubElement(time_el, "beats").text = str(time_signature[0])
            ET.SubElement(time_el, "beat-type").text = str(time_signature[1])
        for dur, midi, tie in parts_by_measure.get(m, []):
            note_el = ET.SubElement(measure, "note")
            if midi is None:
                ET.SubElement(note_el, "rest")
            else:
                step, alter = PC_NAMES[midi % 12]
                pitch = ET.SubElement(note_el, "pitch")
                ET.SubElement(pitch, "step").text = step
                if alter:
                    ET.SubElement(pitch, "alter").text = str(alter)
                ET.SubElement(pitch, "octave").text = str(midi // 12 - 1)
            ticks = dur * divisions
            if ticks.denominator != 1:
                raise ValueError(f"duration {dur} not representable with {divisions} divisions")
            ET.SubElement(note_el, "duration").text = str(ticks.numerator)
            for t in tie:
                ET.SubElement(note_el, "tie", type=t)
            ET.SubElement(note_el, "voice").text = "1"
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def write_corpus(pieces: list[SynthPiece], out_dir) -> Path:
    """Write one MusicXML file per piece and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for piece in pieces:
        name = f"{piece.piece_id}.musicxml"
        (out_dir / name).write_text(to_musicxml(piece))
        entries.append({"path": name, "piece_id": piece.piece_id, "composer": piece.composer,
                        "melody": "highest"})
    manifest = out_dir / "manifest.yaml"
    manifest.write_text(yaml.safe_dump({"pieces": entries}, sort_keys=False))
    return manifest
