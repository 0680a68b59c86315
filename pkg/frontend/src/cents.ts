// Pitch names, frequencies and cent offsets for the ladder display.

const LETTER_SEMITONES: Record<string, number> = {
  C: 0, D: 2, E: 4, F: 5, G: 7, A: 9, B: 11,
};

/** "C4" / "F#3" / "Bb2" to a MIDI note number, or null if unparseable. */
export function parseSpn(spn: string): number | null {
  const m = /^([A-G])([#b]?)(-?\d+)$/.exec(spn.trim());
  if (!m) return null;
  const [, letter, accidental, octave] = m;
  let semitone = LETTER_SEMITONES[letter];
  if (accidental === "#") semitone += 1;
  if (accidental === "b") semitone -= 1;
  const midi = 12 * (Number(octave) + 1) + semitone;
  return midi >= 0 && midi <= 127 ? midi : null;
}

export function midiToSpn(midi: number): string {
  const names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
  const octave = Math.floor(midi / 12) - 1;
  return `${names[((midi % 12) + 12) % 12]}${octave}`;
}

export function midiToHz(midi: number): number {
  return 440.0 * 2 ** ((midi - 69) / 12);
}

export function spnToHz(spn: string): number | null {
  const midi = parseSpn(spn);
  return midi === null ? null : midiToHz(midi);
}

/** Offset of f from the target in cents: 1200 * log2(f / target). */
export function centsOff(fHz: number, targetHz: number): number {
  return 1200 * Math.log2(fHz / targetHz);
}
