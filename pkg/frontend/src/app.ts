// Application shell: one workspace per browser session. A configuration
// file names the local server (and optionally the registry for the admin
// page); everything else is discovered over the documented endpoints.

import { ApiError, SilApi } from './api.js'
import { button, clear, el } from './kit.js'
import { WorkspaceStore } from './state.js'
import { adminPage } from './views/admin.js'
import { basketPanel } from './views/baskets.js'
import { loginView } from './views/login.js'
import { queryEditor } from './views/query.js'
import { serverPicker } from './views/servers.js'

export interface UiConfig {
  serverUrl: string
  nmuUrl?: string
}

export function mountApp(rootEl: HTMLElement, config: UiConfig): {
  store: WorkspaceStore
  api: SilApi
} {
  const store = new WorkspaceStore()
  const api = new SilApi(config.serverUrl)
  render(rootEl, store, api, config)
  return { store, api }
}

export function render(
  rootEl: HTMLElement,
  store: WorkspaceStore,
  api: SilApi,
  config: UiConfig,
): void {
  clear(rootEl)
  const main = el('main', { class: 'workspace' })
  const nav = el('nav', { class: 'bar topbar' })
  rootEl.append(nav, main)

  const showWorkspace = async () => {
    clear(main)
    if (!store.session) {
      main.append(
        loginView(store, api, async () => {
          store.setServers(await api.servers())
          try {
            store.loadWorkspace(await api.getWorkspace('default'))
          } catch (err) {
            if (!(err instanceof ApiError && err.status === 404)) throw err
          }
          await showWorkspace()
        }),
      )
      return
    }
    main.append(serverPicker(store), queryEditor(store, api), basketPanel(store, api))
  }

  const showAdmin = () => {
    clear(main)
    main.append(adminPage(config.nmuUrl ?? config.serverUrl))
  }

  nav.append(
    el('span', { class: 'brand' }, ['silmesh workspace']),
    button('Workspace', () => void showWorkspace(), 'btn nav-workspace'),
    button('Network admin', () => showAdmin(), 'btn nav-admin'),
  )

  // an expired session drops back to the login screen; the query draft
  // survives in the store so the user continues where they were
  store.subscribe(() => {
    if (!store.session && !main.querySelector('.login-view')) {
      void showWorkspace()
    }
  })

  void showWorkspace()
}

export async function bootFromConfig(rootEl: HTMLElement): Promise<void> {
  const resp = await fetch('config.json')
  const config = (await resp.json()) as UiConfig
  mountApp(rootEl, config)
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  void bootFromConfig(document.getElementById('app')!)
}
