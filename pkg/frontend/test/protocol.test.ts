import assert from 'node:assert/strict'
import { test } from 'node:test'

import { ProtocolClient, RequestFailed, SocketLike } from '../src/protocol.js'

class FakeSocket implements SocketLike {
  sent: any[] = []
  listeners = new Map<string, ((ev: any) => void)[]>()

  send(data: string): void {
    this.sent.push(JSON.parse(data))
  }

  close(): void {
    this.emit('close', {})
  }

  addEventListener(type: string, listener: (ev: any) => void): void {
    const existing = this.listeners.get(type) ?? []
    existing.push(listener)
    this.listeners.set(type, existing)
  }

  emit(type: string, ev: any): void {
    for (const listener of this.listeners.get(type) ?? []) listener(ev)
  }

  reply(msg: unknown): void {
    this.emit('message', { data: JSON.stringify(msg) })
  }
}

test('requests carry unique ids and resolve on matching response', async () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  const p1 = client.request('completion/request', { position: 0 })
  const p2 = client.request('completion/request', { position: 1 })
  const [m1, m2] = socket.sent
  assert.notEqual(m1.id, m2.id)
  socket.reply({ id: m2.id, result: { continuations: [] } })
  socket.reply({ id: m1.id, result: { continuations: [{ text: 'x' }] } })
  assert.deepEqual(await p2, { continuations: [] })
  assert.deepEqual(await p1, { continuations: [{ text: 'x' }] })
})

test('error responses reject with code and message', async () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  const p = client.request('revision/request', { range: { start: 0, end: 99 } })
  socket.reply({ id: socket.sent[0].id,
                 error: { code: -32602, message: 'selection must not cross sentences' } })
  await assert.rejects(p, (err: RequestFailed) => {
    assert.equal(err.code, -32602)
    assert.match(err.message, /cross/)
    return true
  })
})

test('superseded revision responses are dropped by id', async () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  const first = client.requestRevision({ start: 0, end: 5 })
  const second = client.requestRevision({ start: 0, end: 7 })
  const [m1, m2] = socket.sent
  const payload = { status: 'ok', documentVersion: 1,
                    replaceRange: { start: 0, end: 5 }, candidates: [] }
  socket.reply({ id: m1.id, result: payload })
  socket.reply({ id: m2.id, result: { ...payload, replaceRange: { start: 0, end: 7 } } })
  assert.equal(await first, null) // dropped: a newer request exists
  const fresh = await second
  assert.deepEqual(fresh?.replaceRange, { start: 0, end: 7 })
})

test('notifications route by method', () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  const seen: any[] = []
  client.onNotification('diagnostics/publish', (params) => seen.push(params))
  socket.reply({ method: 'diagnostics/publish',
                 params: { version: 3, diagnostics: [], degraded: false } })
  socket.reply({ method: 'something/else', params: {} })
  assert.equal(seen.length, 1)
  assert.equal(seen[0].version, 3)
})

test('didChange is a notification without id', () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  client.didChange(4, { start: 1, end: 2 }, 'zz')
  assert.deepEqual(socket.sent[0], {
    method: 'document/didChange',
    params: { version: 4, range: { start: 1, end: 2 }, text: 'zz' },
  })
  assert.ok(!('id' in socket.sent[0]))
})

test('pending requests reject when the socket closes', async () => {
  const socket = new FakeSocket()
  const client = new ProtocolClient(socket)
  const p = client.request('document/get')
  socket.close()
  await assert.rejects(p, /closed/)
})
