// Browser-side codec for the SIL interface language (wire version 0.5).
// Parsing covers every document the UI receives (user, net, resultset,
// workspace); serialization covers what it sends (login, query, workspace).
// The servers accept any well-formed equivalent of the grammar, so the
// serializer aims for validity, not canonical bytes.

export interface ServerRecord {
  name: string
  url?: string
  status?: string
  languages: string[]
  categories: string[]
  description?: string
}

export interface Clause {
  field: string
  op: string
  value: string
}

export interface QueryDoc {
  id: string
  scope: 'metadata' | 'content-count'
  clauses: Clause[]
  targets: string[]
  max?: number
}

export interface Entry {
  uri: string
  sid: string
  title: string
  lang: string
  cat: string
  level: number
  ctype?: string
}

export interface OriginStatus {
  sid: string
  state: string
  count?: number
  detail?: string
}

export interface ResultSetDoc {
  queryId: string
  handle?: string
  total?: number
  complete: boolean
  cursor?: number
  statuses: OriginStatus[]
  entries: Entry[]
}

export interface BasketData {
  name: string
  items: string[]
  created?: string
}

export interface WorkspaceDoc {
  name: string
  servers: string[]
  baskets: BasketData[]
  pageSize: number
  lang?: string
}

export interface ProfileDoc {
  sid: string
  login: string
  level: number
  groups: string[]
  fullname?: string
}

export class SilParseError extends Error {}

function root(xml: string): Element {
  const doc = new DOMParser().parseFromString(xml, 'text/xml')
  const sil = doc.documentElement
  if (!sil || sil.tagName !== 'sil') {
    throw new SilParseError('not a sil document')
  }
  const version = sil.getAttribute('version') ?? '0.5'
  if (version !== '0.5') {
    throw new SilParseError(`wire version ${version} is not 0.5`)
  }
  return sil
}

function payload(sil: Element, tag: string): Element {
  const el = Array.from(sil.children).find((c) => c.tagName === tag)
  if (!el) throw new SilParseError(`document carries no <${tag}> payload`)
  return el
}

const int = (el: Element, attr: string): number | undefined => {
  const v = el.getAttribute(attr)
  return v === null ? undefined : parseInt(v, 10)
}

export function parseProfile(xml: string): ProfileDoc {
  const sil = root(xml)
  const uid = payload(sil, 'uid')
  const login = uid.querySelector('login')?.getAttribute('id') ?? ''
  const groups = Array.from(uid.querySelectorAll('access > group')).map(
    (g) => g.getAttribute('id') ?? '',
  )
  return {
    sid: sil.getAttribute('sid') ?? '',
    login,
    level: int(uid, 'level') ?? 0,
    groups,
    fullname: payload(sil, 'ui').querySelector('name')?.textContent ?? undefined,
  }
}

export function parseServers(xml: string): ServerRecord[] {
  const net = payload(root(xml), 'net')
  return Array.from(net.children).map((s) => ({
    name: s.getAttribute('name') ?? '',
    url: s.getAttribute('url') ?? undefined,
    status: s.getAttribute('status') ?? undefined,
    languages: Array.from(s.querySelectorAll('profile > lang')).map(
      (l) => l.getAttribute('code') ?? '',
    ),
    categories: Array.from(s.querySelectorAll('profile > cat')).map(
      (c) => c.getAttribute('name') ?? '',
    ),
    description: s.querySelector('profile > desc')?.textContent ?? undefined,
  }))
}

export function parseResultSet(xml: string): ResultSetDoc {
  const rs = payload(root(xml), 'rs')
  return {
    queryId: rs.getAttribute('query') ?? '',
    handle: rs.getAttribute('handle') ?? undefined,
    total: int(rs, 'total'),
    complete: rs.getAttribute('complete') !== '0',
    cursor: int(rs, 'cursor'),
    statuses: Array.from(rs.children)
      .filter((c) => c.tagName === 'status')
      .map((s) => ({
        sid: s.getAttribute('sid') ?? '',
        state: s.getAttribute('state') ?? '',
        count: int(s, 'count'),
        detail: s.getAttribute('detail') ?? undefined,
      })),
    entries: Array.from(rs.children)
      .filter((c) => c.tagName === 'entry')
      .map((e) => ({
        uri: e.getAttribute('uri') ?? '',
        sid: e.getAttribute('sid') ?? '',
        title: e.getAttribute('title') ?? '',
        lang: e.getAttribute('lang') ?? '',
        cat: e.getAttribute('cat') ?? '',
        level: int(e, 'level') ?? 0,
        ctype: e.getAttribute('ctype') ?? undefined,
      })),
  }
}

export function parseWorkspace(xml: string): WorkspaceDoc {
  const ws = payload(root(xml), 'ws')
  const prefs = ws.querySelector('prefs')
  return {
    name: ws.getAttribute('name') ?? 'default',
    servers: Array.from(ws.querySelectorAll('servers > server')).map(
      (s) => s.getAttribute('ref') ?? '',
    ),
    baskets: Array.from(ws.querySelectorAll('baskets > basket')).map((b) => ({
      name: b.getAttribute('name') ?? '',
      items: Array.from(b.querySelectorAll('item')).map(
        (i) => i.getAttribute('uri') ?? '',
      ),
      created: b.getAttribute('crdate') ?? undefined,
    })),
    pageSize: prefs ? (int(prefs, 'size') ?? 50) : 50,
    lang: prefs?.getAttribute('lang') ?? undefined,
  }
}

export function parseError(xml: string): { code: string; msg: string } | null {
  if (!xml.startsWith('<error ')) return null
  const el = new DOMParser().parseFromString(xml, 'text/xml').documentElement
  if (!el || el.tagName !== 'error') return null
  return { code: el.getAttribute('code') ?? 'RemoteError', msg: el.getAttribute('msg') ?? '' }
}

// --- serialization ----------------------------------------------------------

const esc = (s: string): string =>
  s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/\n/g, '&#10;')

const uidOf = (login: string, passwd?: string): string =>
  `<uid type="user"><login id="${esc(login)}"/>` +
  (passwd === undefined ? '<passwd/>' : `<passwd>${esc(passwd)}</passwd>`) +
  '<access><default/></access></uid>'

export function serializeLogin(login: string, passwd: string): string {
  return (
    `<sil type="user" sid="client" version="0.5">` +
    uidOf(login, passwd) +
    '<ui/></sil>'
  )
}

export function serializeQuery(q: QueryDoc, login: string): string {
  const clauses = q.clauses
    .map(
      (c) =>
        `<clause field="${esc(c.field)}" op="${esc(c.op)}" value="${esc(c.value)}"/>`,
    )
    .join('')
  const targets = q.targets.length
    ? `<targets>${q.targets.map((t) => `<server ref="${esc(t)}"/>`).join('')}</targets>`
    : ''
  const max = q.max !== undefined ? ` max="${q.max}"` : ''
  return (
    `<sil type="query" sid="client" version="0.5">` +
    uidOf(login) +
    `<ql id="${esc(q.id)}" scope="${q.scope}"${max}>${clauses}${targets}</ql></sil>`
  )
}

export function serializeWorkspace(ws: WorkspaceDoc, login: string): string {
  const servers = ws.servers.length
    ? `<servers>${ws.servers.map((s) => `<server ref="${esc(s)}"/>`).join('')}</servers>`
    : ''
  const baskets = ws.baskets.length
    ? `<baskets>${ws.baskets
        .map(
          (b) =>
            `<basket name="${esc(b.name)}"` +
            (b.created ? ` crdate="${esc(b.created)}"` : '') +
            `>${b.items.map((u) => `<item uri="${esc(u)}"/>`).join('')}</basket>`,
        )
        .join('')}</baskets>`
    : ''
  const lang = ws.lang ? ` lang="${esc(ws.lang)}"` : ''
  return (
    `<sil type="workspace" sid="client" version="0.5">` +
    uidOf(login) +
    `<ws name="${esc(ws.name)}">${servers}${baskets}` +
    `<prefs size="${ws.pageSize}"${lang}/></ws></sil>`
  )
}
