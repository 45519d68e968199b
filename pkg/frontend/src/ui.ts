/**
 * DOM layer of the composer.
 *
 * One Composer instance owns a root element, the state, and the API
 * client.  Every poem annotation (tone classes, rhyme groups, verdicts)
 * is rendered from /analyze responses; the UI adds no prosody logic of
 * its own beyond the static genre length table used to gate the button.
 */

import {
  AnalyzeResponse,
  ComposerApi,
  GenerationResponse,
  ServiceError,
} from "./api.js";
import { Candidate, ComposerState, GENRES } from "./state.js";

const TONE_CLASS: Record<string, string> = {
  ping: "tone-ping",
  ze: "tone-ze",
  unknown: "tone-unknown",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

export class Composer {
  readonly state = new ComposerState();

  private root: HTMLElement;
  private firstLineInput!: HTMLInputElement;
  private genreSelect!: HTMLSelectElement;
  private themeInput!: HTMLInputElement;
  private keyInput!: HTMLInputElement;
  private styleToggle!: HTMLInputElement;
  private styleSelect!: HTMLSelectElement;
  private generateButton!: HTMLButtonElement;
  private hint!: HTMLElement;
  private firstLineError!: HTMLElement;
  private chipError!: HTMLElement;
  private globalError!: HTMLElement;
  private seedDisplay!: HTMLElement;
  private chipsTheme!: HTMLElement;
  private chipsKey!: HTMLElement;
  private candidateList!: HTMLElement;

  constructor(
    root: HTMLElement,
    readonly api: ComposerApi,
  ) {
    this.root = root;
    this.buildSkeleton();
    this.loadStyles();
    this.render();
  }

  private buildSkeleton(): void {
    this.root.innerHTML = "";
    const form = el("section", { class: "composer-form" });

    const genreRow = el("label", { class: "row" }, "体裁 ");
    this.genreSelect = el("select", { id: "genre" });
    for (const genre of GENRES) {
      this.genreSelect.appendChild(el("option", { value: genre }, genre));
    }
    this.genreSelect.value = this.state.genre;
    this.genreSelect.onchange = () => {
      this.state.genre = this.genreSelect.value;
      this.render();
    };
    genreRow.appendChild(this.genreSelect);
    form.appendChild(genreRow);

    const lineRow = el("div", { class: "row" });
    lineRow.appendChild(el("label", { for: "first-line" }, "首句 "));
    this.firstLineInput = el("input", {
      id: "first-line",
      placeholder: "first line",
      autocomplete: "off",
    });
    this.firstLineInput.oninput = () => {
      this.state.firstLine = this.firstLineInput.value.trim();
      this.render();
    };
    lineRow.appendChild(this.firstLineInput);
    this.hint = el("span", { id: "length-hint", class: "hint" });
    lineRow.appendChild(this.hint);
    form.appendChild(lineRow);
    this.firstLineError = el("div", { id: "first-line-error", class: "field-error" });
    form.appendChild(this.firstLineError);

    const themeRow = el("div", { class: "row" });
    themeRow.appendChild(el("label", { for: "theme-input" }, "主题词 "));
    this.chipsTheme = el("span", { id: "theme-chips", class: "chips" });
    themeRow.appendChild(this.chipsTheme);
    this.themeInput = el("input", { id: "theme-input", placeholder: "add theme word" });
    this.themeInput.onkeydown = (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        if (this.state.addThemeWord(this.themeInput.value)) {
          this.themeInput.value = "";
          this.render();
        }
      }
    };
    themeRow.appendChild(this.themeInput);
    form.appendChild(themeRow);

    const keyRow = el("div", { class: "row" });
    keyRow.appendChild(el("label", { for: "key-input" }, "诗眼 "));
    this.chipsKey = el("span", { id: "key-chips", class: "chips" });
    keyRow.appendChild(this.chipsKey);
    this.keyInput = el("input", { id: "key-input", placeholder: "add key char" });
    this.keyInput.onkeydown = (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        if (this.state.addKeyChar(this.keyInput.value)) {
          this.keyInput.value = "";
          this.render();
        }
      }
    };
    keyRow.appendChild(this.keyInput);
    form.appendChild(keyRow);
    this.chipError = el("div", { id: "chip-error", class: "field-error" });
    form.appendChild(this.chipError);

    const styleRow = el("div", { class: "row" });
    this.styleToggle = el("input", { id: "style-toggle", type: "checkbox" });
    this.styleToggle.onchange = () => {
      this.state.useStyle = this.styleToggle.checked;
      this.render();
    };
    styleRow.appendChild(this.styleToggle);
    styleRow.appendChild(el("label", { for: "style-toggle" }, " 限定风格 "));
    this.styleSelect = el("select", { id: "style-select" });
    this.styleSelect.onchange = () => {
      this.state.styleName = this.styleSelect.value || null;
    };
    styleRow.appendChild(this.styleSelect);
    form.appendChild(styleRow);

    const actionRow = el("div", { class: "row" });
    this.generateButton = el("button", { id: "generate" }, "生成");
    this.generateButton.onclick = () => void this.generate();
    actionRow.appendChild(this.generateButton);
    this.seedDisplay = el("span", { id: "seed-display", class: "hint" });
    actionRow.appendChild(this.seedDisplay);
    form.appendChild(actionRow);

    this.globalError = el("div", { id: "global-error", class: "field-error" });
    form.appendChild(this.globalError);

    const legend = el("div", { id: "tone-legend", class: "legend" });
    legend.appendChild(el("span", { class: "tone-ping" }, "平"));
    legend.appendChild(el("span", { class: "tone-ze" }, "仄"));
    legend.appendChild(el("span", { class: "tone-unknown" }, "多音/未知"));
    legend.appendChild(el("span", { class: "rhyme-echo-sample" }, "韵脚"));
    form.appendChild(legend);

    this.root.appendChild(form);
    this.candidateList = el("section", { id: "candidates" });
    this.root.appendChild(this.candidateList);
  }

  private async loadStyles(): Promise<void> {
    try {
      const health = await this.api.health();
      this.styleSelect.innerHTML = "";
      this.styleSelect.appendChild(el("option", { value: "" }, "—"));
      for (const name of health.styles) {
        this.styleSelect.appendChild(el("option", { value: name }, name));
      }
    } catch {
      // style list is cosmetic; the toggle simply stays empty offline
    }
  }

  // -- rendering -----------------------------------------------------------

  render(): void {
    const issue = this.state.firstLineIssue();
    this.hint.textContent = issue ?? `${this.state.lineLength()} 字`;
    this.generateButton.disabled = !this.state.canGenerate();
    this.generateButton.textContent = this.state.pending ? "…" : "生成";
    this.seedDisplay.textContent =
      this.state.lastSeed === null ? "" : `seed ${this.state.lastSeed}`;
    this.styleSelect.disabled = !this.state.useStyle;
    this.renderChips();
  }

  private renderChips(): void {
    this.chipsTheme.innerHTML = "";
    for (const word of this.state.themeWords) {
      this.chipsTheme.appendChild(this.chip(word, () => {
        this.state.removeThemeWord(word);
        this.render();
      }));
    }
    this.chipsKey.innerHTML = "";
    for (const ch of this.state.keyChars) {
      this.chipsKey.appendChild(this.chip(ch, () => {
        this.state.removeKeyChar(ch);
        this.render();
      }));
    }
  }

  private chip(label: string, remove: () => void): HTMLElement {
    const node = el("span", { class: "chip" }, label);
    const close = el("button", { class: "chip-remove", type: "button" }, "×");
    close.onclick = remove;
    node.appendChild(close);
    return node;
  }

  private clearErrors(): void {
    this.firstLineError.textContent = "";
    this.chipError.textContent = "";
    this.globalError.textContent = "";
  }

  private showError(error: unknown, card?: HTMLElement): void {
    const message =
      error instanceof ServiceError ? `${error.code}: ${error.message}` : String(error);
    if (card) {
      const slot = card.querySelector(".card-error") as HTMLElement;
      slot.textContent = message;
      return;
    }
    if (error instanceof ServiceError && error.code === "line_length") {
      this.firstLineError.textContent = message;
    } else if (error instanceof ServiceError && error.code === "style_violation") {
      this.chipError.textContent = message;
    } else {
      this.globalError.textContent = message;
    }
  }

  // -- actions -------------------------------------------------------------

  async generate(seed?: number): Promise<Candidate | null> {
    if (this.state.pending || this.state.firstLineIssue() !== null) {
      return null;
    }
    this.clearErrors();
    this.state.pending = true;
    this.render();
    try {
      const response = await this.api.generate({
        genre: this.state.genre,
        first_line: this.state.firstLine,
        theme_words: this.state.themeWords,
        key_chars: this.state.keyChars,
        style: this.state.useStyle ? this.state.styleName : null,
        seed: seed ?? null,
      });
      return await this.appendCandidate(response, null);
    } catch (error) {
      this.showError(error);
      return null;
    } finally {
      this.state.pending = false;
      this.render();
    }
  }

  async followRhyme(candidateId: number, seed?: number): Promise<Candidate | null> {
    const source = this.state.candidateById(candidateId);
    if (!source || this.state.pending) {
      return null;
    }
    const sourceCard = this.cardFor(candidateId);
    this.clearErrors();
    this.state.pending = true;
    this.render();
    try {
      const response = await this.api.followRhyme({
        poem: source.text,
        seed: seed ?? null,
      });
      return await this.appendCandidate(response, source.id);
    } catch (error) {
      this.showError(error, sourceCard);
      return null;
    } finally {
      this.state.pending = false;
      this.render();
    }
  }

  /** Re-run a candidate's own request with its echoed seed. */
  async regenerate(candidateId: number): Promise<Candidate | null> {
    const source = this.state.candidateById(candidateId);
    if (!source) {
      return null;
    }
    if (source.sourceId !== null) {
      return this.followRhyme(source.sourceId, source.seed);
    }
    return this.generate(source.seed);
  }

  private async appendCandidate(
    response: GenerationResponse,
    sourceId: number | null,
  ): Promise<Candidate> {
    // annotations always come from /analyze, the single source of truth
    const analysis = await this.api.analyze(response.poem.text);
    const candidate = this.state.addCandidate({
      text: response.poem.text,
      lines: response.poem.lines,
      genre: response.poem.genre,
      seed: response.seed,
      entryId: response.entry_id,
      strictnessUsed: response.strictness_used,
      rhymeGroups: analysis.rhyme_group,
      tones: analysis.tones,
      overall: analysis.meter ? analysis.meter.overall : null,
      echoPositions: response.prompt.rhyme ? response.prompt.rhyme.positions : [],
      sourceId,
    });
    this.candidateList.appendChild(this.renderCandidate(candidate, analysis));
    this.render();
    return candidate;
  }

  private cardFor(candidateId: number): HTMLElement | undefined {
    return (
      (this.candidateList.querySelector(
        `[data-candidate-id="${candidateId}"]`,
      ) as HTMLElement) ?? undefined
    );
  }

  private renderCandidate(candidate: Candidate, analysis: AnalyzeResponse): HTMLElement {
    const card = el("article", {
      class: "candidate",
      "data-candidate-id": String(candidate.id),
      "data-entry-id": candidate.entryId,
      "data-seed": String(candidate.seed),
    });

    const header = el("header", { class: "candidate-header" });
    header.appendChild(el("span", { class: "genre-badge" }, candidate.genre));
    for (const group of candidate.rhymeGroups) {
      header.appendChild(el("span", { class: "rhyme-badge" }, group));
    }
    if (candidate.overall) {
      header.appendChild(
        el("span", { class: `verdict verdict-${candidate.overall}` }, candidate.overall),
      );
    }
    header.appendChild(el("span", { class: "seed-badge" }, `seed ${candidate.seed}`));
    if (candidate.sourceId !== null) {
      header.appendChild(
        el("span", { class: "follow-badge" }, `次韵 #${candidate.sourceId}`),
      );
    }
    card.appendChild(header);

    const body = el("div", { class: "poem" });
    candidate.lines.forEach((line, lineIdx) => {
      const row = el("div", { class: "poem-line" });
      const tones = candidate.tones[lineIdx] ?? [];
      [...line].forEach((ch, charIdx) => {
        const cls = [TONE_CLASS[tones[charIdx] ?? "unknown"]];
        const isEnd = charIdx === line.length - 1;
        if (isEnd && candidate.echoPositions.includes(lineIdx + 1)) {
          cls.push("rhyme-echo");
        }
        row.appendChild(el("span", { class: cls.join(" ") }, ch));
      });
      body.appendChild(row);
    });
    card.appendChild(body);

    const footer = el("footer", { class: "candidate-actions" });
    const followButton = el("button", { class: "follow-rhyme" }, "次韵");
    followButton.onclick = () => void this.followRhyme(candidate.id);
    footer.appendChild(followButton);
    const regenButton = el("button", { class: "regenerate" }, "同种重生");
    regenButton.onclick = () => void this.regenerate(candidate.id);
    footer.appendChild(regenButton);
    footer.appendChild(el("span", { class: "entry-id" }, candidate.entryId.slice(0, 12)));
    card.appendChild(footer);
    card.appendChild(el("div", { class: "card-error field-error" }));
    return card;
  }
}

export function mountComposer(root: HTMLElement, api: ComposerApi): Composer {
  return new Composer(root, api);
}
