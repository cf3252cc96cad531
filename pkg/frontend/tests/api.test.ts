import { describe, expect, it, vi } from 'vitest'

import { ApiError, DocscribeApi } from '../src/api.js'

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  })
}

describe('DocscribeApi.transcribe', () => {
  it('posts multipart with segment fields', async () => {
    const fetchMock = vi.fn(async (_url: any, init: any) => {
      const form = init.body as FormData
      expect(form.get('start_s')).toBe('0.5')
      expect(form.get('end_s')).toBe('1.5')
      expect(form.get('use_lm')).toBe('true')
      expect(form.get('audio')).toBeInstanceOf(Blob)
      return jsonResponse({ text: 'AB', nbest: { entries: [] }, spans: [] })
    })
    const api = new DocscribeApi('http://svc', undefined, fetchMock as any)
    const out = await api.transcribe(new Blob([new Uint8Array(4)]), {
      segment: { start_s: 0.5, end_s: 1.5 },
      useLm: true,
    })
    expect(out.text).toBe('AB')
    expect(fetchMock).toHaveBeenCalledOnce()
    expect(fetchMock.mock.calls[0][0]).toBe('http://svc/v1/transcribe')
  })

  it('aborts the previous in-flight request', async () => {
    const seen: AbortSignal[] = []
    const fetchMock = vi.fn((_url: any, init: any) => {
      seen.push(init.signal)
      return new Promise<Response>((resolve) => {
        const done = () => resolve(jsonResponse({ text: 'x', nbest: { entries: [] }, spans: [] }))
        if (init.signal.aborted) done()
        else setTimeout(done, 5)
      })
    })
    const api = new DocscribeApi('http://svc', undefined, fetchMock as any)
    const first = api.transcribe(new Blob(['a']))
    const second = api.transcribe(new Blob(['b']))
    await Promise.allSettled([first, second])
    expect(seen).toHaveLength(2)
    expect(seen[0].aborted).toBe(true)
    expect(seen[1].aborted).toBe(false)
  })

  it('sends the bearer token', async () => {
    const fetchMock = vi.fn(async (_url: any, init: any) => {
      expect(init.headers.authorization).toBe('Bearer sekrit')
      return jsonResponse({ text: '', nbest: { entries: [] }, spans: [] })
    })
    const api = new DocscribeApi('http://svc', 'sekrit', fetchMock as any)
    await api.transcribe(new Blob(['a']))
    expect(fetchMock).toHaveBeenCalledOnce()
  })

  it('raises a typed error with the service detail', async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ detail: 'segment outside audio duration' }, 422),
    )
    const api = new DocscribeApi('http://svc', undefined, fetchMock as any)
    await expect(api.transcribe(new Blob(['a']))).rejects.toThrowError(ApiError)
    await expect(api.transcribe(new Blob(['a']))).rejects.toThrow(/422.*segment outside/)
  })
})

describe('flags', () => {
  it('round-trips create and list', async () => {
    const store: any[] = []
    const fetchMock = vi.fn(async (url: any, init?: any) => {
      if (init?.method === 'POST') {
        const rec = { flag_id: `f${store.length}`, created_at: 'now', ...JSON.parse(init.body) }
        store.push(rec)
        return jsonResponse(rec)
      }
      expect(url).toBe('http://svc/v1/flags')
      return jsonResponse(store)
    })
    const api = new DocscribeApi('http://svc', undefined, fetchMock as any)
    const rec = await api.createFlag({ audio_ref: 'a.wav', transcription: 'AB', note: 'check' })
    expect(rec.flag_id).toBe('f0')
    const listed = await api.listFlags()
    expect(listed).toHaveLength(1)
    expect(listed[0].note).toBe('check')
  })
})
