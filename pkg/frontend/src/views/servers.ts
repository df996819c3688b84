import { badge, clear, el, panel } from '../kit.js'
import type { WorkspaceStore } from '../state.js'

// Registry mirror with profiles; toggling a row edits the working-server
// list. Offline and disconnected servers render but cannot be selected.
export function serverPicker(store: WorkspaceStore): HTMLElement {
  const list = el('ul', { class: 'server-list' })
  const view = panel('Working servers', list)

  const render = () => {
    clear(list)
    if (!store.servers.length) {
      list.append(el('li', { class: 'empty-state' }, [
        'No servers are affiliated to the network yet.',
      ]))
      return
    }
    for (const record of store.servers) {
      const online = record.status === 'online'
      const checkbox = el('input', { type: 'checkbox', class: 'server-toggle' })
      checkbox.checked = store.working.has(record.name)
      checkbox.disabled = !online
      checkbox.addEventListener('change', () => store.toggleServer(record.name))
      const profile = [
        record.languages.join(' '),
        record.categories.join(' '),
        record.description ?? '',
      ]
        .filter(Boolean)
        .join(' · ')
      list.append(
        el('li', { class: `server-row ${online ? '' : 'server-off'}`, 'data-sid': record.name }, [
          checkbox,
          el('span', { class: 'server-name' }, [record.name]),
          badge(record.status ?? 'unknown', online ? 'ok' : 'warn'),
          el('span', { class: 'server-profile' }, [profile]),
        ]),
      )
    }
  }

  store.subscribe(render)
  render()
  return view
}
