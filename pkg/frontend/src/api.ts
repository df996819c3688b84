// Endpoint client. Every call goes through one Http function, so tests can
// substitute a recording fake and assert that only documented endpoints are
// ever used.

import {
  parseError,
  parseProfile,
  parseResultSet,
  parseServers,
  parseWorkspace,
  serializeLogin,
  serializeQuery,
  serializeWorkspace,
  type ProfileDoc,
  type QueryDoc,
  type ResultSetDoc,
  type ServerRecord,
  type WorkspaceDoc,
} from './sil.js'

export interface HttpResponse {
  status: number
  headers: Record<string, string>
  text: string
}

export type Http = (
  method: string,
  url: string,
  headers: Record<string, string>,
  body?: string,
) => Promise<HttpResponse>

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message)
  }
}

export const fetchHttp: Http = async (method, url, headers, body) => {
  const resp = await fetch(url, { method, headers, body })
  const text = await resp.text()
  const out: Record<string, string> = {}
  resp.headers.forEach((v, k) => (out[k.toLowerCase()] = v))
  return { status: resp.status, headers: out, text }
}

function check(resp: HttpResponse): HttpResponse {
  if (resp.status >= 400) {
    const err = parseError(resp.text)
    throw new ApiError(err?.code ?? 'RemoteError', err?.msg ?? resp.text, resp.status)
  }
  return resp
}

const header = (resp: HttpResponse, name: string): string | undefined => {
  for (const [k, v] of Object.entries(resp.headers)) {
    if (k.toLowerCase() === name.toLowerCase()) return v
  }
  return undefined
}

export class SilApi {
  token = ''

  constructor(
    public baseUrl: string,
    private http: Http = fetchHttp,
  ) {}

  private async call(
    method: string,
    path: string,
    body?: string,
  ): Promise<HttpResponse> {
    const headers: Record<string, string> = {}
    if (this.token) headers['X-Session'] = this.token
    if (body !== undefined) headers['Content-Type'] = 'text/xml'
    const resp = await this.http(method, this.baseUrl + path, headers, body)
    return check(resp)
  }

  async login(login: string, passwd: string): Promise<ProfileDoc> {
    const resp = await this.call('POST', '/session', serializeLogin(login, passwd))
    this.token = header(resp, 'X-Session') ?? ''
    return parseProfile(resp.text)
  }

  async servers(): Promise<ServerRecord[]> {
    return parseServers((await this.call('GET', '/servers')).text)
  }

  async openTransaction(): Promise<void> {
    await this.call('POST', '/txn/open')
  }

  async commit(): Promise<void> {
    await this.call('POST', '/txn/commit')
  }

  async postQuery(q: QueryDoc, login: string): Promise<ResultSetDoc> {
    await this.openTransaction()
    const resp = await this.call('POST', '/query', serializeQuery(q, login))
    return parseResultSet(resp.text)
  }

  async nextResults(handle: string, max: number): Promise<ResultSetDoc> {
    const resp = await this.call(
      'GET',
      `/results?handle=${encodeURIComponent(handle)}&max=${max}`,
    )
    return parseResultSet(resp.text)
  }

  async count(q: QueryDoc, login: string): Promise<ResultSetDoc> {
    await this.openTransaction()
    const counted: QueryDoc = { ...q, scope: 'content-count' }
    const resp = await this.call('GET', '/count?handle-free=1', serializeQuery(counted, login))
    return parseResultSet(resp.text)
  }

  async getWorkspace(name: string): Promise<WorkspaceDoc> {
    const resp = await this.call('GET', `/workspace/${encodeURIComponent(name)}`)
    return parseWorkspace(resp.text)
  }

  async putWorkspace(ws: WorkspaceDoc, login: string): Promise<void> {
    await this.openTransaction()
    await this.call(
      'PUT',
      `/workspace/${encodeURIComponent(ws.name)}`,
      serializeWorkspace(ws, login),
    )
    await this.commit()
  }

  resourceUrl(uri: string): string {
    const owner = uri.startsWith('sil://') ? uri.slice(6).split('/', 1)[0] : ''
    const query = owner ? `?sid=${encodeURIComponent(owner)}` : ''
    return `${this.baseUrl}/resource/${encodeURIComponent(uri)}${query}`
  }
}

export class NmuAdminApi {
  constructor(
    public baseUrl: string,
    public secret: string,
    private http: Http = fetchHttp,
  ) {}

  private async call(
    method: string,
    path: string,
    body?: string,
  ): Promise<HttpResponse> {
    const headers: Record<string, string> = { 'X-NMU-Admin': this.secret }
    if (body !== undefined) headers['Content-Type'] = 'text/xml'
    return check(await this.http(method, this.baseUrl + path, headers, body))
  }

  private record(
    name: string,
    url?: string,
    status?: string,
    languages: string[] = [],
    categories: string[] = [],
  ): string {
    const attrs =
      `name="${name}"` +
      (url ? ` url="${url}"` : '') +
      (status ? ` status="${status}"` : '')
    const profile =
      languages.length || categories.length
        ? '<profile>' +
          languages.map((l) => `<lang code="${l}"/>`).join('') +
          categories.map((c) => `<cat name="${c}"/>`).join('') +
          '</profile>'
        : ''
    return (
      '<sil type="net" sid="admin" version="0.5">' +
      '<uid type="provider"><login id="admin"/><passwd/><access><default/></access></uid>' +
      `<net><server ${attrs}>${profile}</server></net></sil>`
    )
  }

  async list(): Promise<ServerRecord[]> {
    const resp = await this.call('GET', '/nmu/servers?include_disconnected=1')
    return parseServers(resp.text)
  }

  async register(
    name: string,
    url: string,
    languages: string[],
    categories: string[],
  ): Promise<void> {
    await this.call(
      'POST',
      '/nmu/admin/register',
      this.record(name, url, undefined, languages, categories),
    )
  }

  async update(name: string, status: string): Promise<void> {
    await this.call('POST', '/nmu/admin/update', this.record(name, undefined, status))
  }

  async disconnect(name: string): Promise<void> {
    await this.call('POST', '/nmu/admin/disconnect', this.record(name))
  }
}
