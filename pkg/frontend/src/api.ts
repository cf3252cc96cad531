/**
 * Typed client for the documentation service's /v1 JSON API.
 *
 * Every network interaction of the UI goes through this module; no
 * decoding logic lives client-side.  At most one transcription request is
 * in flight: a new submit aborts the previous one.
 */

export interface Segment {
  start_s: number
  end_s: number
}

export interface GraphemeSpan {
  grapheme: string
  start_ms: number
  end_ms: number
}

export interface NBestEntry {
  text: string
  am_logp: number
  lm_log10p?: number
  word_count?: number
  combined?: number
}

export interface TranscribeResponse {
  text: string
  nbest: { utterance_id: string; source: string; entries: NBestEntry[] }
  spans: GraphemeSpan[]
}

export interface FlagRecord {
  flag_id: string
  created_at: string
  audio_ref: string
  transcription: string
  segment: Segment | null
  note: string | null
}

export interface TranscribeOptions {
  segment?: Segment
  useLm?: boolean
  alpha?: number
  beta?: number
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`)
  }
}

export class DocscribeApi {
  private inflight: AbortController | null = null

  constructor(
    readonly baseUrl: string,
    readonly bearerToken?: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private headers(): Record<string, string> {
    return this.bearerToken ? { authorization: `Bearer ${this.bearerToken}` } : {}
  }

  private async checked(resp: Response): Promise<Response> {
    if (!resp.ok) {
      let detail = resp.statusText
      try {
        const body = await resp.json()
        detail = typeof body.detail === 'string' ? body.detail : JSON.stringify(body.detail)
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail)
    }
    return resp
  }

  /** POST audio for transcription, cancelling any in-flight request. */
  async transcribe(audio: Blob, options: TranscribeOptions = {}): Promise<TranscribeResponse> {
    this.inflight?.abort()
    const controller = new AbortController()
    this.inflight = controller

    const form = new FormData()
    form.append('audio', audio, 'recording.webm')
    if (options.segment) {
      form.append('start_s', String(options.segment.start_s))
      form.append('end_s', String(options.segment.end_s))
    }
    if (options.useLm) form.append('use_lm', 'true')
    if (options.alpha !== undefined) form.append('alpha', String(options.alpha))
    if (options.beta !== undefined) form.append('beta', String(options.beta))

    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/v1/transcribe`, {
        method: 'POST',
        body: form,
        headers: this.headers(),
        signal: controller.signal,
      })
      return (await this.checked(resp)).json()
    } finally {
      if (this.inflight === controller) this.inflight = null
    }
  }

  async createFlag(flag: {
    audio_ref: string
    transcription: string
    segment?: Segment
    note?: string
  }): Promise<FlagRecord> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/flags`, {
      method: 'POST',
      body: JSON.stringify(flag),
      headers: { 'content-type': 'application/json', ...this.headers() },
    })
    return (await this.checked(resp)).json()
  }

  async listFlags(): Promise<FlagRecord[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/flags`, {
      headers: this.headers(),
    })
    return (await this.checked(resp)).json()
  }

  async health(): Promise<{ status: string; model_endpoint_configured: boolean; lm_loaded: boolean }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/health`)
    return (await this.checked(resp)).json()
  }
}
