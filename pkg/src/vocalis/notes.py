"""Scientific pitch notation, pitch events, and scale-task schedules."""
from __future__ import annotations

import re
from dataclasses import dataclass

A4_HZ = 440.0
A4_MIDI = 69

_LETTER_TO_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_SHARP_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
_WHITE_PCS = frozenset(_LETTER_TO_PC.values())

_SPN_RE = re.compile(r"^([A-Ga-g])([#b]?)(-?\d+)$")


class PitchError(ValueError):
    """Raised for unparseable pitch notation or invalid pitch ranges."""


def midi_to_freq(midi: int) -> float:
    return A4_HZ * 2.0 ** ((midi - A4_MIDI) / 12.0)


@dataclass(frozen=True)
class PitchLabel:
    spn: str
    midi: int
    freq_hz: float

    @classmethod
    def from_midi(cls, midi: int) -> "PitchLabel":
        return cls(spn=format_spn(midi), midi=midi, freq_hz=midi_to_freq(midi))

    def is_white_key(self) -> bool:
        return self.midi % 12 in _WHITE_PCS


def parse_spn(text: str) -> PitchLabel:
    """Parse scientific pitch notation like "A4", "C#3", "Bb2".

    Equal temperament, A4 = 440 Hz; octaves -1 through 9 (C-1 = midi 0).
    """
    m = _SPN_RE.match(text.strip())
    if not m:
        raise PitchError(f"malformed pitch notation: {text!r}")
    letter, accidental, octave_text = m.groups()
    octave = int(octave_text)
    if not -1 <= octave <= 9:
        raise PitchError(f"octave out of range in {text!r}")
    pc = _LETTER_TO_PC[letter.upper()]
    if accidental == "#":
        pc += 1
    elif accidental == "b":
        pc -= 1
    midi = (octave + 1) * 12 + pc
    if not 0 <= midi <= 127:
        raise PitchError(f"pitch {text!r} maps outside midi 0..127")
    return PitchLabel(spn=text.strip(), midi=midi, freq_hz=midi_to_freq(midi))


def format_spn(midi: int) -> str:
    """Canonical sharp-spelled name for a midi number, e.g. 61 -> "C#4"."""
    if not 0 <= midi <= 127:
        raise PitchError(f"midi {midi} out of range 0..127")
    return f"{_SHARP_NAMES[midi % 12]}{midi // 12 - 1}"


@dataclass(frozen=True)
class PitchEvent:
    """One scheduled or segmented pitch with its time span."""

    label: PitchLabel
    start_s: float
    end_s: float
    source: str = "scale_task"  # scale_task | song_segment

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise PitchError(
                f"pitch event must have start < end, got [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def scale_schedule(
    low: PitchLabel,
    high: PitchLabel,
    bpm: float = 80.0,
    hold_s: float = 2.0,
    white_keys_only: bool = True,
) -> list[PitchEvent]:
    """Consecutive hold_s-long events stepping up through the scale.

    With white_keys_only the steps are the C-major diatonic degrees and
    both endpoints must be white keys; otherwise every semitone is
    scheduled. bpm records the tempo of the piano cue the singer follows;
    event boundaries come from hold_s alone.
    """
    if bpm <= 0:
        raise PitchError(f"bpm must be positive, got {bpm}")
    if hold_s <= 0:
        raise PitchError(f"hold_s must be positive, got {hold_s}")
    if low.midi > high.midi:
        raise PitchError(f"range must ascend, got {low.spn}..{high.spn}")
    if white_keys_only:
        for end in (low, high):
            if not end.is_white_key():
                raise PitchError(
                    f"{end.spn} is not a white key; unset white_keys_only to include it"
                )
    midis = [
        m
        for m in range(low.midi, high.midi + 1)
        if not white_keys_only or m % 12 in _WHITE_PCS
    ]
    return [
        PitchEvent(
            label=PitchLabel.from_midi(m),
            start_s=i * hold_s,
            end_s=(i + 1) * hold_s,
            source="scale_task",
        )
        for i, m in enumerate(midis)
    ]
