// End-to-end echo test against the real backend: scripted
// select -> revise -> apply -> undo round trips must leave the client and
// server documents byte-identical, and the candidates must arrive in
// server order with well-formed green/red run styling.

import assert from 'node:assert/strict'
import { spawn, ChildProcess } from 'node:child_process'
import path from 'node:path'
import { test } from 'node:test'
import { fileURLToPath } from 'node:url'

import { DiagnosticsState } from '../src/diagnostics.js'
import { DocumentModel } from '../src/document.js'
import { ProtocolClient, DiagnosticsParams, RevisionResult } from '../src/protocol.js'
import { applyCandidate, candidateRuns, suggestionBox } from '../src/suggestions.js'

const HERE = path.dirname(fileURLToPath(import.meta.url))
const CORPUS = path.join(HERE, '..', '..', 'test', 'fixtures', 'corpus.txt')

function startServer(): Promise<{ proc: ChildProcess; url: string }> {
  return new Promise((resolve, reject) => {
    const proc = spawn('python3', [
      '-m', 'draftforge.cli', 'serve', '--corpus', CORPUS, '--port', '0',
    ])
    let buffer = ''
    const timer = setTimeout(() => {
      proc.kill()
      reject(new Error(`server did not start: ${buffer}`))
    }, 30000)
    proc.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString()
      const match = buffer.match(/ws:\/\/[\d.]+:\d+\/teaspn/)
      if (match) {
        clearTimeout(timer)
        resolve({ proc, url: match[0] })
      }
    })
    proc.stderr!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString()
    })
    proc.on('exit', (code) => {
      clearTimeout(timer)
      reject(new Error(`server exited early (${code}): ${buffer}`))
    })
  })
}

function connect(url: string): Promise<WebSocket> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(url)
    socket.addEventListener('open', () => resolve(socket))
    socket.addEventListener('error', (ev: any) => reject(new Error(String(ev))))
  })
}

async function assertServerMatches(client: ProtocolClient, doc: DocumentModel) {
  const server = await client.getServerDocument()
  assert.equal(server.text, doc.text, 'client and server documents diverged')
  assert.equal(server.version, doc.version)
}

function assertWellStyled(result: RevisionResult) {
  const ppls = result.candidates.map((c) => c.perplexity)
  assert.deepEqual(ppls, [...ppls].sort((a, b) => a - b),
    'candidates not in server (perplexity) order')
  for (const cand of result.candidates) {
    const runs = candidateRuns(cand)
    assert.deepEqual(runs.map((r) => r.cls), cand.diff.map((d) => d.op),
      'styling must mirror diff ops in order')
    for (const run of runs) {
      assert.ok(['keep', 'insert', 'delete'].includes(run.cls))
    }
    const visible = runs.filter((r) => r.cls !== 'delete').map((r) => r.text).join('')
    assert.equal(visible, cand.text,
      'keep+insert runs must concatenate to the candidate text')
  }
}

test('echo: select/revise/apply/undo round trips stay byte-identical', { timeout: 120000 }, async () => {
  const { proc, url } = await startServer()
  try {
    const socket = await connect(url)
    const client = new ProtocolClient(socket as any)
    const doc = new DocumentModel(client)
    const notifications: DiagnosticsParams[] = []
    client.onNotification('diagnostics/publish', (params) => notifications.push(params))

    const TEXT = 'the model improves the results . we report the results here .'
    doc.apply({ start: 0, end: 0 }, TEXT)
    await assertServerMatches(client, doc)

    // round 1: sub-span selection over "improves"
    const selStart = TEXT.indexOf('improves')
    const result1 = await client.requestRevision(
      { start: selStart, end: selStart + 'improves'.length })
    assert.ok(result1 && result1.status === 'ok' && result1.candidates.length > 0)
    assert.ok(result1.candidates.length <= 8)
    assertWellStyled(result1)
    // no identity row: the server drops candidates equal to the input
    const sentence = doc.text.slice(result1.replaceRange.start, result1.replaceRange.end)
    for (const cand of result1.candidates) {
      assert.notEqual(cand.text.split(/\s+/).join(' '),
        sentence.split(/\s+/).join(' '))
    }

    const before1 = doc.text
    const box1 = suggestionBox(result1.replaceRange, result1.candidates)
    applyCandidate(doc, box1, 0)
    assert.notEqual(doc.text, before1)
    await assertServerMatches(client, doc)

    assert.ok(doc.undo())
    assert.equal(doc.text, before1)
    await assertServerMatches(client, doc)

    // round 2: whole second sentence
    const s2start = doc.text.indexOf('we report')
    const result2 = await client.requestRevision({ start: s2start, end: doc.text.length })
    assert.ok(result2)
    if (result2.status === 'ok' && result2.candidates.length > 0) {
      assertWellStyled(result2)
      const before2 = doc.text
      applyCandidate(doc, suggestionBox(result2.replaceRange, result2.candidates), 0)
      await assertServerMatches(client, doc)
      assert.ok(doc.undo())
      assert.equal(doc.text, before2)
      await assertServerMatches(client, doc)
    }

    // completion with the title/section extension
    const completion = await client.requestCompletion(
      doc.text.length, 'Toy Paper Title', 'Results', 2)
    assert.equal(completion.documentVersion, doc.version)
    assert.ok(completion.continuations.length >= 1)

    // diagnostics: introduce a doubled word, wait out the debounce,
    // then apply the suggested replacement and stay in sync
    doc.apply({ start: 0, end: 0 }, 'the the ')
    const params = await waitFor(notifications, (p) => p.version === doc.version)
    const state = new DiagnosticsState()
    assert.ok(state.accept(params, doc))
    assert.ok(state.current.length >= 1)
    const diag = state.current[0]
    assert.ok(diag.replacements.length >= 1)
    state.applyReplacement(doc, diag, diag.replacements[0])
    await assertServerMatches(client, doc)

    await client.shutdown()
  } finally {
    proc.kill()
  }
})

async function waitFor<T>(items: T[], match: (item: T) => boolean,
                          timeoutMs = 10000): Promise<T> {
  const deadline = Date.now() + timeoutMs
  while (Date.now() < deadline) {
    const hit = items.find(match)
    if (hit) return hit
    await new Promise((r) => setTimeout(r, 50))
  }
  throw new Error('timed out waiting for a matching notification')
}
