import { ProtocolClient } from './protocol.js'
import { Editor } from './editor.js'

function main(): void {
  const params = new URLSearchParams(window.location.search)
  const server = params.get('server') ?? 'ws://127.0.0.1:8765/teaspn'
  const socket = new WebSocket(server)
  socket.addEventListener('open', () => {
    const client = new ProtocolClient(socket)
    new Editor(document.body, client)
    const status = document.querySelector('#status') as HTMLElement
    status.textContent = `connected to ${server}`
  })
  socket.addEventListener('error', () => {
    const status = document.querySelector('#status') as HTMLElement
    status.textContent = `cannot reach ${server}`
  })
}

window.addEventListener('load', main)
