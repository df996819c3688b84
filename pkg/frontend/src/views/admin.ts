import { ApiError, NmuAdminApi, type Http, fetchHttp } from '../api.js'
import { badge, banner, button, clear, el, field, panel } from '../kit.js'

// Network-master page: the registry's admin operations as simple forms.
export function adminPage(nmuUrl: string, http: Http = fetchHttp): HTMLElement {
  const secret = el('input', { class: 'input admin-secret', type: 'password' })
  const name = el('input', { class: 'input admin-name' })
  const url = el('input', { class: 'input admin-url' })
  const languages = el('input', { class: 'input admin-langs', placeholder: 'fr de' })
  const categories = el('input', { class: 'input admin-cats', placeholder: 'prose verse' })
  const table = el('div', { class: 'admin-table' })

  const view = panel(
    'Network management',
    field('Admin secret', secret),
    field('Server name', name),
    field('Address (URL)', url),
    field('Languages', languages),
    field('Categories', categories),
  )

  const api = () => new NmuAdminApi(nmuUrl, secret.value, http)

  const fail = (err: unknown) => {
    if (err instanceof ApiError && err.code === 'AdminAuthFailed') {
      banner(view, 'Admin credential rejected.', 'error')
    } else {
      banner(view, (err as Error).message, 'error')
    }
  }

  const refresh = async () => {
    try {
      const records = await api().list()
      clear(table)
      for (const r of records) {
        const row = el('div', { class: 'admin-row', 'data-sid': r.name }, [
          el('span', { class: 'server-name' }, [r.name]),
          badge(r.status ?? '?', r.status === 'online' ? 'ok' : 'warn'),
          el('span', {}, [r.url ?? '']),
          button('offline', () => void mutate(() => api().update(r.name, 'offline')), 'btn btn-small'),
          button('online', () => void mutate(() => api().update(r.name, 'online')), 'btn btn-small'),
          button('disconnect', () => void mutate(() => api().disconnect(r.name)), 'btn btn-small set-disconnect'),
        ])
        table.append(row)
      }
      banner(view, '', 'ok')
    } catch (err) {
      fail(err)
    }
  }

  const mutate = async (op: () => Promise<void>) => {
    try {
      await op()
      await refresh()
    } catch (err) {
      fail(err)
    }
  }

  const register = button('Register server', () =>
    void mutate(() =>
      api().register(
        name.value.trim(),
        url.value.trim(),
        languages.value.split(/\s+/).filter(Boolean),
        categories.value.split(/\s+/).filter(Boolean),
      ),
    ), 'btn btn-primary admin-register')

  view.append(
    el('div', { class: 'bar' }, [register, button('Refresh list', () => void refresh(), 'btn admin-refresh')]),
    table,
  )
  return view
}
