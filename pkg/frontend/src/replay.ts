// Transcript step-through: parses the harness's line-delimited format
// and exposes a cursor with hint and task-list markers highlighted.

export interface TranscriptHeader {
  scenario: string;
  difficulty: string;
  role: string;
  chain_length: number;
  total_tools: number;
  total_key_steps: number;
  completed: boolean;
  cap_exceeded: boolean;
}

export interface TranscriptStep {
  index: number;
  scene: string;
  action: string | null;
  action_raw: string;
  success: boolean;
  feedback: string;
  progress: { kind: string; target: string | null };
  game_over: boolean;
  hint_active: boolean;
  hint_issued: boolean;
  task_delta: Record<string, unknown> | null;
}

export interface TranscriptHint {
  after_step: number;
  progress_kind: string;
  explicit: boolean;
  text: string;
}

export interface TranscriptMetrics {
  hints_used: number;
  total_steps: number;
  early_exit_progress: number;
}

export interface Transcript {
  header: TranscriptHeader;
  steps: TranscriptStep[];
  hints: TranscriptHint[];
  metrics: TranscriptMetrics | null;
}

export class TranscriptError extends Error {}

export function parseTranscript(text: string): Transcript {
  let header: TranscriptHeader | null = null;
  const steps: TranscriptStep[] = [];
  const hints: TranscriptHint[] = [];
  let metrics: TranscriptMetrics | null = null;

  for (const [lineNo, line] of text.split("\n").entries()) {
    if (!line.trim()) {
      continue;
    }
    let doc: any;
    try {
      doc = JSON.parse(line);
    } catch {
      throw new TranscriptError(`line ${lineNo + 1}: not valid JSON`);
    }
    switch (doc.type) {
      case "header":
        header = doc as TranscriptHeader;
        break;
      case "step":
        steps.push(doc as TranscriptStep);
        break;
      case "hint":
        hints.push(doc as TranscriptHint);
        break;
      case "metrics":
        metrics = doc as TranscriptMetrics;
        break;
      default:
        throw new TranscriptError(`line ${lineNo + 1}: unknown record type ${doc.type}`);
    }
  }
  if (!header) {
    throw new TranscriptError("transcript has no header line");
  }
  if (steps.length === 0) {
    throw new TranscriptError("transcript has no steps");
  }
  return { header, steps, hints, metrics };
}

export class ReplayStepper {
  position = 0;

  constructor(readonly transcript: Transcript) {}

  get length(): number {
    return this.transcript.steps.length;
  }

  current(): TranscriptStep {
    const step = this.transcript.steps[this.position];
    if (!step) {
      throw new TranscriptError(`no step at position ${this.position}`);
    }
    return step;
  }

  next(): TranscriptStep {
    if (this.position < this.length - 1) {
      this.position += 1;
    }
    return this.current();
  }

  prev(): TranscriptStep {
    if (this.position > 0) {
      this.position -= 1;
    }
    return this.current();
  }

  seek(position: number): TranscriptStep {
    this.position = Math.min(Math.max(position, 0), this.length - 1);
    return this.current();
  }

  /** Hint issued right after the current step, if any. */
  hintAfterCurrent(): TranscriptHint | null {
    const index = this.current().index;
    return this.transcript.hints.find((hint) => hint.after_step === index) ?? null;
  }

  /** Step indices with hint activations, for timeline markers. */
  hintMarkers(): number[] {
    return this.transcript.hints.map((hint) => hint.after_step);
  }

  taskDeltaMarkers(): number[] {
    return this.transcript.steps
      .filter((step) => step.task_delta != null)
      .map((step) => step.index);
  }
}
