// Diagnostics bookkeeping: keep only notifications matching the current
// document version (stale ones are dropped silently), find the diagnostic
// under the cursor for the hover popover, and apply a replacement as a
// normal versioned edit.

import { DiagnosticsParams, WireDiagnostic } from './protocol.js'
import { DocumentModel } from './document.js'

export class DiagnosticsState {
  current: WireDiagnostic[] = []
  degraded = false
  private version = -1

  accept(params: DiagnosticsParams, doc: DocumentModel): boolean {
    if (params.version !== doc.version) return false
    this.current = params.diagnostics
    this.degraded = params.degraded
    this.version = params.version
    return true
  }

  at(offset: number): WireDiagnostic | undefined {
    return this.current.find((d) => d.range.start <= offset && offset < d.range.end)
  }

  applyReplacement(doc: DocumentModel, diagnostic: WireDiagnostic,
                   replacement: string): void {
    doc.apply(diagnostic.range, replacement)
    this.current = []
  }
}
