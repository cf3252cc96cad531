/**
 * Page session state: current audio, latest transcription, active segment
 * selection, and the flag-list cache.  A plain observable store so the DOM
 * layer stays a thin render function and the logic is testable headlessly.
 */

import { DocscribeApi, FlagRecord, Segment, TranscribeResponse } from './api.js'

export interface SessionSnapshot {
  hasAudio: boolean
  audioLabel: string
  duration_s: number
  segment: Segment | null
  transcription: TranscribeResponse | null
  segmentTranscription: TranscribeResponse | null
  flags: FlagRecord[]
  busy: boolean
  error: string | null
}

type Listener = (snap: SessionSnapshot) => void

export class Session {
  private audio: Blob | null = null
  private audioLabel = ''
  private duration_s = 0
  private segment: Segment | null = null
  private transcription: TranscribeResponse | null = null
  private segmentTranscription: TranscribeResponse | null = null
  private flags: FlagRecord[] = []
  private busy = false
  private error: string | null = null
  private listeners: Listener[] = []

  constructor(private readonly api: DocscribeApi) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn)
    fn(this.snapshot())
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn)
    }
  }

  private emit(): void {
    const snap = this.snapshot()
    for (const fn of this.listeners) fn(snap)
  }

  snapshot(): SessionSnapshot {
    return {
      hasAudio: this.audio !== null,
      audioLabel: this.audioLabel,
      duration_s: this.duration_s,
      segment: this.segment,
      transcription: this.transcription,
      segmentTranscription: this.segmentTranscription,
      flags: [...this.flags],
      busy: this.busy,
      error: this.error,
    }
  }

  get canSubmit(): boolean {
    return this.audio !== null && !this.busy
  }

  setAudio(blob: Blob, label: string, duration_s: number): void {
    this.audio = blob
    this.audioLabel = label
    this.duration_s = duration_s
    this.segment = null
    this.transcription = null
    this.segmentTranscription = null
    this.error = null
    this.emit()
  }

  /** Select a waveform region; clamped to the audio duration. */
  select(segment: Segment | null): void {
    if (segment === null) {
      this.segment = null
    } else {
      const start = Math.max(0, Math.min(segment.start_s, this.duration_s))
      const end = Math.max(start, Math.min(segment.end_s, this.duration_s))
      this.segment = end > start ? { start_s: start, end_s: end } : null
    }
    this.segmentTranscription = null
    this.emit()
  }

  /** Transcribe the whole clip. */
  async submit(useLm = false): Promise<void> {
    if (!this.audio) return
    await this.run(async () => {
      this.transcription = await this.api.transcribe(this.audio!, { useLm })
    })
  }

  /** Transcribe only the selected region. */
  async submitSegment(useLm = false): Promise<void> {
    if (!this.audio || !this.segment) return
    const segment = this.segment
    await this.run(async () => {
      this.segmentTranscription = await this.api.transcribe(this.audio!, {
        segment,
        useLm,
      })
    })
  }

  /** Flag the current pair (segment transcription when one is active). */
  async flag(note?: string): Promise<FlagRecord | null> {
    const active = this.segment ? this.segmentTranscription : this.transcription
    if (!this.audio || !active) return null
    let record: FlagRecord | null = null
    await this.run(async () => {
      record = await this.api.createFlag({
        audio_ref: this.audioLabel,
        transcription: active.text,
        segment: this.segment ?? undefined,
        note,
      })
      this.flags = await this.api.listFlags()
    })
    return record
  }

  async refreshFlags(): Promise<void> {
    await this.run(async () => {
      this.flags = await this.api.listFlags()
    })
  }

  private async run(work: () => Promise<void>): Promise<void> {
    this.busy = true
    this.error = null
    this.emit()
    try {
      await work()
    } catch (e) {
      if ((e as Error).name === 'AbortError') return // superseded request
      this.error = e instanceof Error ? e.message : String(e)
    } finally {
      this.busy = false
      this.emit()
    }
  }
}
