// Wire types and the request/response client for the editing-assistance
// protocol: one JSON message per WebSocket text frame, integer ids on
// requests, none on notifications.

export interface CharRange {
  start: number
  end: number
}

export interface DiffRun {
  op: 'keep' | 'insert' | 'delete'
  text: string
}

export interface Candidate {
  text: string
  logprob: number
  perplexity: number
  diff: DiffRun[]
}

export interface RevisionResult {
  status: 'ok' | 'no_improvement'
  documentVersion: number
  replaceRange: CharRange
  candidates: Candidate[]
}

export interface Continuation {
  text: string
  perplexity: number | null
}

export interface CompletionResult {
  documentVersion: number
  continuations: Continuation[]
}

export interface WireDiagnostic {
  range: CharRange
  message: string
  replacements: string[]
  source: 'external' | 'builtin'
}

export interface DiagnosticsParams {
  version: number
  diagnostics: WireDiagnostic[]
  degraded: boolean
}

export interface ProtocolError {
  code: number
  message: string
}

// Minimal surface shared by the browser WebSocket and Node's client.
export interface SocketLike {
  send(data: string): void
  close(): void
  addEventListener(type: string, listener: (ev: any) => void): void
}

type Pending = {
  resolve: (value: unknown) => void
  reject: (err: Error) => void
}

export class RequestFailed extends Error {
  readonly code: number

  constructor(error: ProtocolError) {
    super(error.message)
    this.code = error.code
  }
}

export class ProtocolClient {
  private socket: SocketLike
  private nextId = 1
  private pending = new Map<number, Pending>()
  private notificationHandlers = new Map<string, ((params: any) => void)[]>()
  /** id of the newest revision request; older ones resolve as superseded */
  private latestRevisionId = 0

  constructor(socket: SocketLike) {
    this.socket = socket
    socket.addEventListener('message', (ev: MessageEvent) => {
      this.dispatch(String(ev.data))
    })
    socket.addEventListener('close', () => {
      for (const [, p] of this.pending) {
        p.reject(new Error('connection closed'))
      }
      this.pending.clear()
    })
  }

  private dispatch(frame: string): void {
    let msg: any
    try {
      msg = JSON.parse(frame)
    } catch {
      return
    }
    if (typeof msg.id === 'number' && this.pending.has(msg.id)) {
      const p = this.pending.get(msg.id)!
      this.pending.delete(msg.id)
      if (msg.error) {
        p.reject(new RequestFailed(msg.error))
      } else {
        p.resolve(msg.result)
      }
      return
    }
    if (typeof msg.method === 'string') {
      for (const handler of this.notificationHandlers.get(msg.method) ?? []) {
        handler(msg.params ?? {})
      }
    }
  }

  onNotification(method: string, handler: (params: any) => void): void {
    const handlers = this.notificationHandlers.get(method) ?? []
    handlers.push(handler)
    this.notificationHandlers.set(method, handlers)
  }

  request(method: string, params?: unknown): Promise<unknown> {
    const id = this.nextId++
    const msg: any = { id, method }
    if (params !== undefined) msg.params = params
    const promise = new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject })
    })
    this.socket.send(JSON.stringify(msg))
    return promise
  }

  notify(method: string, params?: unknown): void {
    const msg: any = { method }
    if (params !== undefined) msg.params = params
    this.socket.send(JSON.stringify(msg))
  }

  didChange(version: number, range: CharRange, text: string): void {
    this.notify('document/didChange', { version, range, text })
  }

  /**
   * Request revisions for a selection. Only the newest request counts:
   * responses to earlier ones resolve to null (dropped by id), so a stale
   * suggestion box never overwrites a fresh one.
   */
  async requestRevision(range: CharRange): Promise<RevisionResult | null> {
    const id = this.nextId
    this.latestRevisionId = id
    const result = await this.request('revision/request', { range })
    if (this.latestRevisionId !== id) return null
    return result as RevisionResult
  }

  async requestCompletion(position: number, title?: string, section?: string,
                          k?: number): Promise<CompletionResult> {
    const params: any = { position }
    if (title) params.title = title
    if (section) params.section = section
    if (k) params.k = k
    return (await this.request('completion/request', params)) as CompletionResult
  }

  async getServerDocument(): Promise<{ text: string; version: number }> {
    return (await this.request('document/get')) as { text: string; version: number }
  }

  async shutdown(): Promise<void> {
    await this.request('shutdown')
    this.socket.close()
  }
}
