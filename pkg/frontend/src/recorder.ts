/** Microphone capture via MediaRecorder. */

export class MicRecorder {
  private stream?: MediaStream
  private recorder?: MediaRecorder
  private chunks: BlobPart[] = []

  get recording(): boolean {
    return this.recorder?.state === 'recording'
  }

  async start(): Promise<void> {
    this.stream = await navigator.mediaDevices.getUserMedia({ audio: true })
    this.recorder = new MediaRecorder(this.stream)
    this.chunks = []
    this.recorder.ondataavailable = (e) => this.chunks.push(e.data)
    this.recorder.start()
  }

  async stop(): Promise<Blob> {
    const recorder = this.recorder
    if (!recorder) throw new Error('not recording')
    await new Promise<void>((resolve) => {
      recorder.onstop = () => resolve()
      recorder.stop()
    })
    this.stream?.getTracks().forEach((t) => t.stop())
    this.stream = undefined
    this.recorder = undefined
    return new Blob(this.chunks, { type: recorder.mimeType || 'audio/webm' })
  }
}
