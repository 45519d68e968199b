/**
 * Composer state: what the user has dialled in plus the candidate history.
 *
 * The state never computes prosody itself; candidates carry exactly what
 * the service's /analyze endpoint reported for them.
 */

export const GENRE_LINE_LENGTH: Record<string, number> = {
  五言绝句: 5,
  七言绝句: 7,
  五言律诗: 5,
  七言律诗: 7,
};

export const GENRES = Object.keys(GENRE_LINE_LENGTH);

export interface Candidate {
  id: number;
  text: string;
  lines: string[];
  genre: string;
  seed: number;
  entryId: string;
  strictnessUsed: string;
  /** annotations straight from /analyze */
  rhymeGroups: string[];
  tones: string[][];
  overall: string | null;
  /** rhyme-position highlights for follow-rhyme children (1-indexed lines) */
  echoPositions: number[];
  sourceId: number | null;
}

export class ComposerState {
  genre: string = GENRES[1]; // 七言绝句
  firstLine = "";
  themeWords: string[] = [];
  keyChars: string[] = [];
  styleName: string | null = null;
  useStyle = false;
  candidates: Candidate[] = [];
  selectedId: number | null = null;
  lastSeed: number | null = null;
  pending = false;
  private nextId = 1;

  lineLength(): number {
    return GENRE_LINE_LENGTH[this.genre] ?? 0;
  }

  firstLineIssue(): string | null {
    const expected = this.lineLength();
    if (this.firstLine.length === 0) {
      return `enter a first line of ${expected} characters`;
    }
    if (this.firstLine.length !== expected) {
      return `${this.genre} needs ${expected} characters, got ${this.firstLine.length}`;
    }
    return null;
  }

  canGenerate(): boolean {
    return !this.pending && this.firstLineIssue() === null;
  }

  addThemeWord(word: string): boolean {
    const trimmed = word.trim();
    if (!trimmed || /\s/.test(trimmed) || this.themeWords.includes(trimmed)) {
      return false;
    }
    this.themeWords.push(trimmed);
    return true;
  }

  removeThemeWord(word: string): void {
    this.themeWords = this.themeWords.filter((w) => w !== word);
  }

  addKeyChar(ch: string): boolean {
    const trimmed = ch.trim();
    if (trimmed.length !== 1 || this.keyChars.includes(trimmed)) {
      return false;
    }
    this.keyChars.push(trimmed);
    return true;
  }

  removeKeyChar(ch: string): void {
    this.keyChars = this.keyChars.filter((c) => c !== ch);
  }

  addCandidate(candidate: Omit<Candidate, "id">): Candidate {
    const entry: Candidate = { ...candidate, id: this.nextId++ };
    this.candidates.push(entry); // prior candidates stay for comparison
    this.selectedId = entry.id;
    this.lastSeed = entry.seed;
    return entry;
  }

  candidateById(id: number): Candidate | undefined {
    return this.candidates.find((c) => c.id === id);
  }

  selected(): Candidate | undefined {
    return this.selectedId === null ? undefined : this.candidateById(this.selectedId);
  }
}
