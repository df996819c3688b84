import { ApiError, type SilApi } from '../api.js'
import { badge, banner, button, clear, el, panel } from '../kit.js'
import type { WorkspaceStore } from '../state.js'
import type { Clause } from '../sil.js'

const FIELDS = ['language', 'category', 'title', 'id', 'keyword']
const OPS = ['eq', 'contains']

// Query editor plus result stream. Selection narrows progressively: every
// facet link in a result row conjoins one more clause onto the draft.
export function queryEditor(store: WorkspaceStore, api: SilApi): HTMLElement {
  const clauseRows = el('div', { class: 'clause-rows' })
  const results = el('div', { class: 'result-stream' })
  const totals = el('div', { class: 'count-line' })
  const view = panel('Resource selection', clauseRows, totals, results)

  const draftInputs = (): Clause[] =>
    Array.from(clauseRows.querySelectorAll('.clause-row')).map((row) => ({
      field: (row.querySelector('.clause-field') as HTMLSelectElement).value,
      op: (row.querySelector('.clause-op') as HTMLSelectElement).value,
      value: (row.querySelector('.clause-value') as HTMLInputElement).value,
    }))

  const renderDraft = () => {
    clear(clauseRows)
    for (const [i, clause] of store.draft.entries()) {
      const fieldSel = el('select', { class: 'clause-field' })
      for (const f of FIELDS) fieldSel.append(el('option', { value: f }, [f]))
      fieldSel.value = clause.field
      const opSel = el('select', { class: 'clause-op' })
      for (const o of OPS) opSel.append(el('option', { value: o }, [o]))
      opSel.value = clause.op
      const value = el('input', { class: 'input clause-value', value: clause.value })
      const drop = button('×', () => {
        store.setDraft(store.draft.filter((_, j) => j !== i))
        renderDraft()
      }, 'btn btn-small')
      clauseRows.append(el('div', { class: 'clause-row' }, [fieldSel, opSel, value, drop]))
    }
    clauseRows.append(
      button('+ clause', () => {
        store.setDraft([...draftInputs(), { field: 'language', op: 'eq', value: '' }])
        renderDraft()
      }, 'btn btn-small add-clause'),
    )
  }

  const renderPage = () => {
    clear(results)
    for (const status of store.statuses) {
      if (status.state === 'failed') {
        results.append(badge(`${status.sid}: failed`, 'warn'))
      }
    }
    const table = el('table', { class: 'result-table' })
    for (const entry of store.page) {
      const langLink = button(entry.lang, () => refine('language', entry.lang), 'btn facet')
      const catLink = button(entry.cat, () => refine('category', entry.cat), 'btn facet')
      const pin = button('🧺', () => store.pin('selection', entry.uri), 'btn btn-small pin')
      table.append(
        el('tr', { class: 'result-row', 'data-uri': entry.uri }, [
          el('td', {}, [el('a', { href: api.resourceUrl(entry.uri), class: 'res-link' }, [entry.title])]),
          el('td', {}, [langLink]),
          el('td', {}, [catLink]),
          el('td', {}, [entry.sid]),
          el('td', {}, [pin]),
        ]),
      )
    }
    results.append(table)
    if (!store.complete && store.handle) {
      results.append(button('More results', () => nextPage(), 'btn next-page'))
    }
  }

  async function run(): Promise<void> {
    store.setDraft(draftInputs().filter((c) => c.value !== ''))
    renderDraft()
    if (!store.draft.length) {
      banner(view, 'Add at least one clause.', 'error')
      return
    }
    banner(view, '', 'ok')
    try {
      const rs = await api.postQuery(
        {
          id: store.nextQueryId(),
          scope: 'metadata',
          clauses: store.draft,
          targets: store.targets(),
        },
        store.session?.login ?? '',
      )
      store.showPage([], rs.statuses, rs.handle ?? null, rs.complete)
      if (rs.handle && !rs.complete) await nextPage()
      else renderPage()
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        store.dropSession() // draft stays; the shell shows the login view
        return
      }
      banner(view, (err as Error).message, 'error')
    }
  }

  async function nextPage(): Promise<void> {
    if (!store.handle) return
    const rs = await api.nextResults(store.handle, store.pageSize)
    store.showPage([...rs.entries], rs.statuses, store.handle, rs.complete)
    renderPage()
  }

  function refine(field: string, value: string): void {
    store.addFacet(field, value)
    renderDraft()
    void run()
  }

  async function runCount(): Promise<void> {
    try {
      const rs = await api.count(
        {
          id: store.nextQueryId(),
          scope: 'content-count',
          clauses: draftInputs().filter((c) => c.value !== ''),
          targets: store.targets(),
        },
        store.session?.login ?? '',
      )
      clear(totals)
      const parts = rs.statuses.map((s) =>
        s.state === 'done' ? `${s.sid}: ${s.count}` : `${s.sid}: ?`)
      totals.append(`${rs.total} matching resources (${parts.join(', ')})`)
    } catch (err) {
      banner(view, (err as Error).message, 'error')
    }
  }

  const bar = el('div', { class: 'bar' }, [
    button('Search', () => void run(), 'btn btn-primary run-query'),
    button('Count only', () => void runCount(), 'btn run-count'),
  ])
  view.insertBefore(bar, totals)

  store.setDraft(store.draft.length ? store.draft : [{ field: 'language', op: 'eq', value: '' }])
  renderDraft()
  renderPage()
  return view
}
