import { ApiError, type SilApi } from '../api.js'
import { banner, button, el, field, panel } from '../kit.js'
import type { WorkspaceStore } from '../state.js'

export function loginView(
  store: WorkspaceStore,
  api: SilApi,
  onLogin: () => Promise<void> | void,
): HTMLElement {
  const login = el('input', { class: 'input', name: 'login', autocomplete: 'username' })
  const passwd = el('input', { class: 'input', name: 'passwd', type: 'password' })
  const view = panel(
    'Connect',
    field('Login', login),
    field('Password', passwd),
  )
  view.classList.add('login-view')
  const submit = button('Identify', async () => {
    try {
      const profile = await api.login(login.value, passwd.value)
      store.startSession({
        login: profile.login,
        level: profile.level,
        sid: profile.sid,
      })
      await onLogin()
    } catch (err) {
      // one uniform message: the server never says which part was wrong
      if (err instanceof ApiError && err.status === 401) {
        banner(view, 'Identification failed.', 'error')
      } else {
        banner(view, `Server unavailable: ${(err as Error).message}`, 'error')
      }
    }
  })
  submit.classList.add('login-submit')
  view.append(submit)
  return view
}
