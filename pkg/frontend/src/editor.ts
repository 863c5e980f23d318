// DOM wiring: a textarea editor with a suggestion box, metadata panel,
// placeholder button, diagnostics underlines, and the keyboard gestures
// (Tab for completion, Esc to dismiss, arrows + Enter in the box).

import { ProtocolClient, RevisionResult, RequestFailed } from './protocol.js'
import { DocumentModel } from './document.js'
import { DiagnosticsState } from './diagnostics.js'
import {
  SuggestionBoxState,
  applyCandidate,
  candidateRuns,
  moveSelection,
  selectionLooksCrossSentence,
  suggestionBox,
} from './suggestions.js'

export class Editor {
  private client: ProtocolClient
  private doc: DocumentModel
  private diagnostics = new DiagnosticsState()
  private box: SuggestionBoxState | null = null

  private textarea: HTMLTextAreaElement
  private boxEl: HTMLElement
  private statusEl: HTMLElement
  private popoverEl: HTMLElement
  private titleInput: HTMLInputElement
  private sectionInput: HTMLInputElement

  constructor(root: HTMLElement, client: ProtocolClient) {
    this.client = client
    this.doc = new DocumentModel(client)
    this.textarea = root.querySelector('#editor') as HTMLTextAreaElement
    this.boxEl = root.querySelector('#suggestions') as HTMLElement
    this.statusEl = root.querySelector('#status') as HTMLElement
    this.popoverEl = root.querySelector('#popover') as HTMLElement
    this.titleInput = root.querySelector('#meta-title') as HTMLInputElement
    this.sectionInput = root.querySelector('#meta-section') as HTMLInputElement

    this.textarea.addEventListener('input', () => this.onInput())
    this.textarea.addEventListener('keydown', (ev) => this.onKey(ev))
    this.textarea.addEventListener('mousemove', (ev) => this.onHover(ev))
    const reviseBtn = root.querySelector('#revise') as HTMLButtonElement
    reviseBtn.addEventListener('click', () => this.requestRevision())
    const placeholderBtn = root.querySelector('#placeholder') as HTMLButtonElement
    placeholderBtn.addEventListener('click', () => this.insertPlaceholder())
    const undoBtn = root.querySelector('#undo') as HTMLButtonElement
    undoBtn.addEventListener('click', () => this.undo())

    client.onNotification('diagnostics/publish', (params) => {
      if (this.diagnostics.accept(params, this.doc)) this.renderStatus()
    })
    client.onNotification('document/resync', () => {
      // server lost sync: replay the full text as one edit
      this.doc.apply({ start: 0, end: this.doc.text.length }, this.textarea.value)
    })
  }

  // -- text sync ----------------------------------------------------------

  private onInput(): void {
    // textarea gives us the new value; send it as one whole-document edit
    const next = this.textarea.value
    if (next === this.doc.text) return
    this.doc.apply({ start: 0, end: this.doc.text.length }, next)
  }

  private refreshTextarea(): void {
    this.textarea.value = this.doc.text
  }

  private undo(): void {
    if (this.doc.undo()) this.refreshTextarea()
  }

  private insertPlaceholder(): void {
    const pos = this.textarea.selectionStart
    const before = this.doc.text.slice(0, pos)
    const after = this.doc.text.slice(pos)
    const chunk = (before.endsWith(' ') || !before ? '' : ' ') + '()' +
      (after.startsWith(' ') || !after ? '' : ' ')
    this.doc.apply({ start: pos, end: pos }, chunk)
    this.refreshTextarea()
  }

  // -- revision -------------------------------------------------------------

  async requestRevision(): Promise<void> {
    const start = this.textarea.selectionStart
    const end = this.textarea.selectionEnd
    if (start === end) {
      this.status('select a sentence or part of one first')
      return
    }
    if (selectionLooksCrossSentence(this.doc.text.slice(start, end))) {
      this.status('selection must not cross sentences')
      return
    }
    try {
      const result = await this.client.requestRevision({ start, end })
      if (result === null) return // superseded by a newer request
      this.showSuggestions(result)
    } catch (err) {
      if (err instanceof RequestFailed) this.status(err.message)
      else throw err
    }
  }

  private showSuggestions(result: RevisionResult): void {
    if (result.status === 'no_improvement' || result.candidates.length === 0) {
      this.status('no improvement found')
      this.box = null
      this.boxEl.replaceChildren()
      return
    }
    this.box = suggestionBox(result.replaceRange, result.candidates)
    this.renderSuggestions()
  }

  private renderSuggestions(): void {
    const box = this.box
    this.boxEl.replaceChildren()
    if (!box) return
    box.candidates.forEach((candidate, idx) => {
      const row = document.createElement('div')
      row.className = 'candidate' + (idx === box.selected ? ' selected' : '')
      for (const run of candidateRuns(candidate)) {
        const span = document.createElement('span')
        span.className = `run-${run.cls}`
        span.textContent = run.cls === 'delete' ? `•${run.text}•` : run.text
        row.appendChild(span)
      }
      row.addEventListener('click', () => this.pick(idx))
      this.boxEl.appendChild(row)
    })
  }

  private pick(index: number): void {
    if (!this.box) return
    applyCandidate(this.doc, this.box, index)
    this.box = null
    this.boxEl.replaceChildren()
    this.refreshTextarea()
    this.status('revision applied (undo restores the original)')
  }

  // -- completion --------------------------------------------------------------

  private async triggerCompletion(): Promise<void> {
    const pos = this.textarea.selectionStart
    const title = this.titleInput.value.trim() || undefined
    const section = this.sectionInput.value.trim() || undefined
    const result = await this.client.requestCompletion(pos, title, section)
    if (result.continuations.length === 0) return
    const text = result.continuations[0].text
    this.doc.apply({ start: pos, end: pos }, text)
    this.refreshTextarea()
    this.status(`completed with: ${text}`)
  }

  // -- diagnostics ---------------------------------------------------------------

  private onHover(ev: MouseEvent): void {
    const offset = this.textarea.selectionStart
    const diag = this.diagnostics.at(offset)
    if (!diag) {
      this.popoverEl.hidden = true
      return
    }
    this.popoverEl.hidden = false
    this.popoverEl.replaceChildren()
    const msg = document.createElement('div')
    msg.textContent = diag.message
    this.popoverEl.appendChild(msg)
    for (const replacement of diag.replacements) {
      const btn = document.createElement('button')
      btn.textContent = replacement
      btn.addEventListener('click', () => {
        this.diagnostics.applyReplacement(this.doc, diag, replacement)
        this.refreshTextarea()
        this.popoverEl.hidden = true
      })
      this.popoverEl.appendChild(btn)
    }
  }

  private renderStatus(): void {
    const n = this.diagnostics.current.length
    const suffix = this.diagnostics.degraded ? ' (checker degraded)' : ''
    this.status(n === 0 ? `no issues${suffix}` : `${n} issue(s) found${suffix}`)
  }

  private status(text: string): void {
    this.statusEl.textContent = text
  }

  private onKey(ev: KeyboardEvent): void {
    if (ev.key === 'Tab') {
      ev.preventDefault()
      void this.triggerCompletion()
    } else if (ev.altKey && ev.key === 'p') {
      ev.preventDefault()
      this.insertPlaceholder()
    } else if (ev.key === 'Escape') {
      this.box = null
      this.boxEl.replaceChildren()
      this.popoverEl.hidden = true
    } else if (this.box && ev.key === 'ArrowDown') {
      ev.preventDefault()
      this.box = moveSelection(this.box, 1)
      this.renderSuggestions()
    } else if (this.box && ev.key === 'ArrowUp') {
      ev.preventDefault()
      this.box = moveSelection(this.box, -1)
      this.renderSuggestions()
    } else if (this.box && ev.key === 'Enter') {
      ev.preventDefault()
      this.pick(this.box.selected)
    }
  }
}
