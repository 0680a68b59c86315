import pytest

from vocalis.notes import (
    PitchError,
    PitchEvent,
    PitchLabel,
    format_spn,
    midi_to_freq,
    parse_spn,
    scale_schedule,
)


class TestSpn:
    def test_reference_frequencies(self):
        assert parse_spn("A4").freq_hz == 440.0
        assert parse_spn("G2").freq_hz == pytest.approx(97.9989, abs=1e-4)
        assert parse_spn("E6").freq_hz == pytest.approx(1318.5102, abs=1e-4)
        assert parse_spn("C4").midi == 60

    def test_round_trip_all_midi(self):
        for midi in range(128):
            assert parse_spn(format_spn(midi)).midi == midi

    def test_accidentals(self):
        assert parse_spn("C#4").midi == 61
        assert parse_spn("Db4").midi == 61
        assert parse_spn("Bb2").midi == parse_spn("A#2").midi == 46

    def test_case_insensitive_letter(self):
        assert parse_spn("a4").midi == 69

    def test_octave_arithmetic(self):
        assert parse_spn("A5").freq_hz == pytest.approx(880.0)
        assert parse_spn("A3").freq_hz == pytest.approx(220.0)

    @pytest.mark.parametrize("bad", ["H4", "C##4", "A", "4", "", "Cb-3", "G#99"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(PitchError):
            parse_spn(bad)

    def test_white_key_predicate(self):
        assert parse_spn("C4").is_white_key()
        assert parse_spn("B3").is_white_key()
        assert not parse_spn("C#4").is_white_key()

    def test_format_range_guard(self):
        with pytest.raises(PitchError):
            format_spn(128)
        with pytest.raises(PitchError):
            format_spn(-1)

    def test_midi_to_freq_monotone(self):
        freqs = [midi_to_freq(m) for m in range(0, 128)]
        assert all(a < b for a, b in zip(freqs, freqs[1:]))


class TestPitchEvent:
    def test_duration(self):
        ev = PitchEvent(label=parse_spn("A4"), start_s=1.0, end_s=3.5)
        assert ev.duration_s == 2.5

    def test_rejects_empty_span(self):
        with pytest.raises(PitchError):
            PitchEvent(label=parse_spn("A4"), start_s=2.0, end_s=2.0)
        with pytest.raises(PitchError):
            PitchEvent(label=parse_spn("A4"), start_s=3.0, end_s=1.0)


class TestScaleSchedule:
    def test_g2_to_e6_white_keys(self):
        events = scale_schedule(parse_spn("G2"), parse_spn("E6"))
        assert len(events) == 27
        assert events[0].label.spn == "G2"
        assert events[-1].label.spn == "E6"
        for i, ev in enumerate(events):
            assert ev.start_s == pytest.approx(i * 2.0)
            assert ev.duration_s == pytest.approx(2.0)
        # contiguous, ascending, white keys only
        for a, b in zip(events, events[1:]):
            assert a.end_s == b.start_s
            assert b.label.midi > a.label.midi
            assert b.label.is_white_key()

    def test_chromatic_count(self):
        events = scale_schedule(
            parse_spn("C4"), parse_spn("C5"), white_keys_only=False
        )
        assert len(events) == 13

    def test_one_octave_white_keys(self):
        events = scale_schedule(parse_spn("C4"), parse_spn("C5"))
        assert [e.label.spn for e in events] == [
            "C4", "D4", "E4", "F4", "G4", "A4", "B4", "C5",
        ]

    def test_custom_hold(self):
        events = scale_schedule(parse_spn("C4"), parse_spn("E4"), hold_s=1.5)
        assert events[1].start_s == 1.5
        assert events[1].end_s == 3.0

    def test_black_key_endpoint_rejected(self):
        with pytest.raises(PitchError, match="white key"):
            scale_schedule(parse_spn("C#4"), parse_spn("C5"))
        # but allowed when chromatic is requested
        events = scale_schedule(parse_spn("C#4"), parse_spn("E4"), white_keys_only=False)
        assert events[0].label.spn == "C#4"

    def test_descending_range_rejected(self):
        with pytest.raises(PitchError, match="ascend"):
            scale_schedule(parse_spn("C5"), parse_spn("C4"))

    def test_parameter_validation(self):
        with pytest.raises(PitchError):
            scale_schedule(parse_spn("C4"), parse_spn("C5"), bpm=0.0)
        with pytest.raises(PitchError):
            scale_schedule(parse_spn("C4"), parse_spn("C5"), hold_s=0.0)

    def test_single_note_range(self):
        events = scale_schedule(parse_spn("A4"), parse_spn("A4"))
        assert len(events) == 1
        assert events[0].label.spn == "A4"


class TestPitchLabel:
    def test_from_midi(self):
        label = PitchLabel.from_midi(69)
        assert label.spn == "A4"
        assert label.freq_hz == 440.0
