/** DOM wiring for the review page; all logic lives in Session. */

import { DocscribeApi } from './api.js'
import { MicRecorder } from './recorder.js'
import { Session } from './session.js'
import { decodeForPreview, drawWaveform, selectionFromDrag } from './waveform.js'

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing #${id}`)
  return node as T
}

export function mount(): void {
  const params = new URLSearchParams(window.location.search)
  const api = new DocscribeApi(
    params.get('api') ?? '',
    params.get('token') ?? undefined,
  )
  const session = new Session(api)
  const recorder = new MicRecorder()

  const fileInput = el<HTMLInputElement>('file-input')
  const recordBtn = el<HTMLButtonElement>('record-btn')
  const submitBtn = el<HTMLButtonElement>('submit-btn')
  const segmentBtn = el<HTMLButtonElement>('segment-btn')
  const flagBtn = el<HTMLButtonElement>('flag-btn')
  const noteInput = el<HTMLInputElement>('note-input')
  const useLm = el<HTMLInputElement>('use-lm')
  const output = el<HTMLTextAreaElement>('output')
  const segmentOutput = el<HTMLTextAreaElement>('segment-output')
  const canvas = el<HTMLCanvasElement>('waveform')
  const flagList = el<HTMLUListElement>('flag-list')
  const status = el<HTMLSpanElement>('status')

  let samples: Float32Array = new Float32Array(0)

  async function loadBlob(blob: Blob, label: string): Promise<void> {
    const preview = await decodeForPreview(blob)
    samples = preview.samples
    session.setAudio(blob, label, preview.duration_s)
  }

  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0]
    if (file) void loadBlob(file, file.name)
  })

  recordBtn.addEventListener('click', () => {
    if (recorder.recording) {
      void recorder.stop().then((blob) => {
        recordBtn.textContent = 'Record'
        return loadBlob(blob, `mic-${new Date().toISOString()}.webm`)
      })
    } else {
      void recorder.start().then(() => {
        recordBtn.textContent = 'Stop'
      })
    }
  })

  let dragStart: number | null = null
  canvas.addEventListener('mousedown', (e) => {
    dragStart = e.offsetX
  })
  canvas.addEventListener('mouseup', (e) => {
    if (dragStart === null) return
    const snap = session.snapshot()
    session.select(
      selectionFromDrag(dragStart, e.offsetX, canvas.width, snap.duration_s),
    )
    dragStart = null
  })
  canvas.addEventListener('dblclick', () => session.select(null))

  submitBtn.addEventListener('click', () => void session.submit(useLm.checked))
  segmentBtn.addEventListener('click', () => void session.submitSegment(useLm.checked))
  flagBtn.addEventListener('click', () => {
    void session.flag(noteInput.value || undefined).then(() => {
      noteInput.value = ''
    })
  })

  session.subscribe((snap) => {
    submitBtn.disabled = !snap.hasAudio || snap.busy
    segmentBtn.disabled = !snap.hasAudio || snap.busy || !snap.segment
    flagBtn.disabled =
      snap.busy || !(snap.segment ? snap.segmentTranscription : snap.transcription)
    output.value = snap.transcription?.text ?? ''
    segmentOutput.value = snap.segmentTranscription?.text ?? ''
    status.textContent = snap.busy ? 'working…' : snap.error ?? ''
    drawWaveform(canvas, samples, snap.segment, snap.duration_s)
    flagList.replaceChildren(
      ...snap.flags.map((f) => {
        const li = document.createElement('li')
        const seg = f.segment
          ? ` [${f.segment.start_s.toFixed(2)}–${f.segment.end_s.toFixed(2)}s]`
          : ''
        li.textContent = `${f.created_at} ${f.audio_ref}${seg}: ${f.transcription}` +
          (f.note ? ` (${f.note})` : '')
        return li
      }),
    )
  })

  void session.refreshFlags()
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mount()
}
