// Workspace state. The thin-client rule is structural: the store keeps
// exactly one unpinned result page (each new page replaces the last), and
// everything a user wants to keep goes into a basket as a pointer.

import type {
  BasketData,
  Clause,
  Entry,
  OriginStatus,
  ServerRecord,
  WorkspaceDoc,
} from './sil.js'

export interface SessionInfo {
  login: string
  level: number
  sid: string
}

export class StoreError extends Error {}

export class WorkspaceStore {
  session: SessionInfo | null = null
  servers: ServerRecord[] = []
  working = new Set<string>()
  draft: Clause[] = []
  page: Entry[] = []
  statuses: OriginStatus[] = []
  handle: string | null = null
  complete = true
  baskets: BasketData[] = []
  workspaceName = 'default'
  pageSize = 50
  querySeq = 0

  private listeners: (() => void)[] = []

  subscribe(fn: () => void): void {
    this.listeners.push(fn)
  }

  private emit(): void {
    for (const fn of this.listeners) fn()
  }

  // --- session ---------------------------------------------------------

  startSession(info: SessionInfo): void {
    this.session = info
    this.emit()
  }

  // Session death keeps the query draft so the iterative flow survives a
  // re-login.
  dropSession(): void {
    this.session = null
    this.page = []
    this.handle = null
    this.emit()
  }

  // --- servers ----------------------------------------------------------

  setServers(records: ServerRecord[]): void {
    this.servers = records
    for (const name of [...this.working]) {
      const rec = records.find((r) => r.name === name)
      if (!rec || rec.status !== 'online') this.working.delete(name)
    }
    this.emit()
  }

  toggleServer(name: string): void {
    const rec = this.servers.find((r) => r.name === name)
    if (!rec || rec.status !== 'online') return // offline: not selectable
    if (this.working.has(name)) this.working.delete(name)
    else this.working.add(name)
    this.emit()
  }

  targets(): string[] {
    return [...this.working].sort()
  }

  // --- query draft --------------------------------------------------------

  setDraft(clauses: Clause[]): void {
    this.draft = clauses
    this.emit()
  }

  /** Progressive restriction: one facet click conjoins a new clause. */
  addFacet(field: string, value: string): void {
    if (this.draft.some((c) => c.field === field && c.op === 'eq' && c.value === value)) {
      return
    }
    this.draft = [...this.draft, { field, op: 'eq', value }]
    this.emit()
  }

  nextQueryId(): string {
    this.querySeq += 1
    return `ui-q${this.querySeq}`
  }

  // --- the one unpinned page ------------------------------------------------

  showPage(entries: Entry[], statuses: OriginStatus[], handle: string | null,
           complete: boolean): void {
    this.page = entries // replaces, never accumulates
    this.statuses = statuses
    this.handle = handle
    this.complete = complete
    this.emit()
  }

  /** Entries held outside baskets; the thin-client gauge. */
  unpinnedCount(): number {
    return this.page.length
  }

  // --- baskets ------------------------------------------------------------------

  basket(name: string): BasketData | undefined {
    return this.baskets.find((b) => b.name === name)
  }

  createBasket(name: string): void {
    if (!name) throw new StoreError('a basket needs a name')
    if (this.basket(name)) throw new StoreError(`basket '${name}' already exists`)
    this.baskets = [...this.baskets, { name, items: [] }]
    this.emit()
  }

  renameBasket(from: string, to: string): void {
    if (this.basket(to)) throw new StoreError(`basket '${to}' already exists`)
    const basket = this.basket(from)
    if (!basket) throw new StoreError(`no basket '${from}'`)
    basket.name = to
    this.emit()
  }

  pin(basketName: string, uri: string): void {
    let basket = this.basket(basketName)
    if (!basket) {
      this.createBasket(basketName)
      basket = this.basket(basketName)!
    }
    if (!basket.items.includes(uri)) basket.items.push(uri) // dedup
    this.emit()
  }

  unpin(basketName: string, uri: string): void {
    const basket = this.basket(basketName)
    if (!basket) throw new StoreError(`no basket '${basketName}'`)
    basket.items = basket.items.filter((u) => u !== uri)
    this.emit()
  }

  // --- workspace document round trip ------------------------------------------------

  toWorkspace(): WorkspaceDoc {
    return {
      name: this.workspaceName,
      servers: this.targets(),
      baskets: this.baskets.map((b) => ({ ...b, items: [...b.items] })),
      pageSize: this.pageSize,
    }
  }

  loadWorkspace(ws: WorkspaceDoc): void {
    this.workspaceName = ws.name
    this.working = new Set(ws.servers)
    this.baskets = ws.baskets.map((b) => ({ ...b, items: [...b.items] }))
    this.pageSize = ws.pageSize
    this.emit()
  }
}
