// Suggestion-box state and rendering model. Candidates stay exactly in
// server order (the server already ranked them by perplexity); a row is a
// list of styled runs: inserts render green, deletes render as red
// tracked-deletion markers, keeps render plain.

import { Candidate, CharRange } from './protocol.js'
import { DocumentModel } from './document.js'

export interface SuggestionBoxState {
  anchor: CharRange
  candidates: Candidate[]
  selected: number
}

export interface StyledRun {
  cls: 'keep' | 'insert' | 'delete'
  text: string
}

export function suggestionBox(anchor: CharRange, candidates: Candidate[]): SuggestionBoxState {
  return { anchor, candidates, selected: 0 }
}

/** Row model for one candidate; order and content mirror the diff runs. */
export function candidateRuns(candidate: Candidate): StyledRun[] {
  return candidate.diff.map((run) => ({ cls: run.op, text: run.text }))
}

export function moveSelection(state: SuggestionBoxState, delta: number): SuggestionBoxState {
  if (state.candidates.length === 0) return state
  const n = state.candidates.length
  const selected = ((state.selected + delta) % n + n) % n
  return { ...state, selected }
}

/** Replace the anchored text with the chosen candidate, verbatim. */
export function applyCandidate(doc: DocumentModel, state: SuggestionBoxState,
                               index?: number): void {
  const pick = index ?? state.selected
  const candidate = state.candidates[pick]
  if (!candidate) throw new RangeError(`no candidate at index ${pick}`)
  doc.apply(state.anchor, candidate.text)
}

/**
 * Light client-side guard matching the server rule that a selection must
 * not cross sentences; the server stays authoritative, this only saves a
 * round trip for the obvious cases.
 */
export function selectionLooksCrossSentence(selected: string): boolean {
  return /[.!?]["')\]]*\s+\S/.test(selected)
}
