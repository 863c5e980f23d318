// Client-side document state. Every mutation is a versioned edit that is
// also sent to the server, so both sides fold the same change sequence;
// undo replays the inverse edit as a new version (versions only grow).

import { CharRange, ProtocolClient } from './protocol.js'

export interface Edit {
  range: CharRange
  text: string
}

interface UndoEntry {
  inverse: Edit
  redo: Edit
}

export class DocumentModel {
  text = ''
  version = 0
  private undoStack: UndoEntry[] = []
  private redoStack: UndoEntry[] = []
  private client: ProtocolClient | null

  constructor(client: ProtocolClient | null = null) {
    this.client = client
  }

  /** Apply one edit locally, bump the version, and notify the server. */
  apply(range: CharRange, newText: string): void {
    const { start, end } = range
    if (start < 0 || end < start || end > this.text.length) {
      throw new RangeError(`edit range (${start}, ${end}) outside document`)
    }
    const replaced = this.text.slice(start, end)
    this.undoStack.push({
      inverse: { range: { start, end: start + newText.length }, text: replaced },
      redo: { range: { start, end }, text: newText },
    })
    this.redoStack = []
    this.commit({ start, end }, newText)
  }

  /** Revert the newest edit; byte-exact by construction. */
  undo(): boolean {
    const entry = this.undoStack.pop()
    if (!entry) return false
    this.redoStack.push(entry)
    this.commit(entry.inverse.range, entry.inverse.text)
    return true
  }

  redo(): boolean {
    const entry = this.redoStack.pop()
    if (!entry) return false
    this.undoStack.push(entry)
    this.commit(entry.redo.range, entry.redo.text)
    return true
  }

  private commit(range: CharRange, newText: string): void {
    this.text = this.text.slice(0, range.start) + newText + this.text.slice(range.end)
    this.version += 1
    this.client?.didChange(this.version, range, newText)
  }
}
