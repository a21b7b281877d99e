/**
 * Resolution form model: exactly one gold mode must be selected before a
 * request is sent. Validation failures block the submit client-side.
 */

import type { AdjudicationItem, GoldPayload } from './types.js';

export type GoldMode = 'candidate' | 'free_form' | 'rubric';

export interface ResolutionFormState {
  mode: GoldMode | null;
  candidateIndex: number | null;
  freeText: string;
  rubricText: string;
  expertId: string;
}

export function emptyForm(): ResolutionFormState {
  return { mode: null, candidateIndex: null, freeText: '', rubricText: '', expertId: '' };
}

export type FormResult =
  | { ok: true; gold: GoldPayload }
  | { ok: false; errors: string[] };

export function buildGold(form: ResolutionFormState, item: AdjudicationItem): FormResult {
  const errors: string[] = [];
  if (form.mode === null) {
    errors.push('select exactly one gold mode');
  }
  if (!form.expertId.trim()) {
    errors.push('expert id is required');
  }
  let gold: GoldPayload | null = null;
  if (form.mode === 'candidate') {
    if (
      form.candidateIndex === null ||
      form.candidateIndex < 0 ||
      form.candidateIndex >= item.candidate_answers.length
    ) {
      errors.push('pick one candidate answer');
    } else {
      gold = textToGold(item.candidate_answers[form.candidateIndex].answer);
    }
  } else if (form.mode === 'free_form') {
    if (!form.freeText.trim()) {
      errors.push('enter the gold value');
    } else {
      gold = textToGold(form.freeText);
    }
  } else if (form.mode === 'rubric') {
    if (!form.rubricText.trim()) {
      errors.push('enter the rubric criteria');
    } else {
      gold = { type: 'rubric', criteria: form.rubricText.trim() };
    }
  }
  if (errors.length > 0 || gold === null) {
    return { ok: false, errors: errors.length ? errors : ['incomplete form'] };
  }
  return { ok: true, gold };
}

/** Numeric-looking decisions become numeric golds; anything else is text. */
export function textToGold(raw: string): GoldPayload {
  const trimmed = raw.trim();
  const numeric = parseDecision(trimmed);
  if (numeric !== null) {
    return { type: 'numeric', value: numeric };
  }
  return { type: 'exact_text', text: trimmed.toLowerCase() };
}

export function parseDecision(text: string): number | null {
  const cleaned = text
    .replace(/[,\s]/g, '')
    .replace(/−/g, '-')
    .replace(/%$/, '');
  if (cleaned === '' || !/^[+-]?(\d+\.?\d*|\.\d+)$/.test(cleaned)) {
    return null;
  }
  const value = Number(cleaned);
  return Number.isFinite(value) ? value : null;
}
