import type { SilApi } from '../api.js'
import { banner, button, clear, el, panel } from '../kit.js'
import { StoreError, type WorkspaceStore } from '../state.js'

// Shopping baskets: named lists of resource pointers, saved with the
// workspace on the user's home server.
export function basketPanel(store: WorkspaceStore, api: SilApi): HTMLElement {
  const lists = el('div', { class: 'basket-lists' })
  const name = el('input', { class: 'input basket-name', placeholder: 'new basket' })
  const view = panel('Baskets', lists)

  const render = () => {
    clear(lists)
    for (const basket of store.baskets) {
      const items = el('ul', { class: 'basket-items' })
      for (const uri of basket.items) {
        items.append(
          el('li', { 'data-uri': uri }, [
            el('span', { class: 'basket-uri' }, [uri]),
            button('remove', () => store.unpin(basket.name, uri), 'btn btn-small'),
          ]),
        )
      }
      const rename = button('rename', () => {
        const to = prompt(`Rename basket '${basket.name}' to:`, basket.name)
        if (!to || to === basket.name) return
        try {
          store.renameBasket(basket.name, to)
        } catch (err) {
          if (err instanceof StoreError) banner(view, err.message, 'error')
        }
      }, 'btn btn-small rename-basket')
      lists.append(
        el('div', { class: 'basket', 'data-basket': basket.name }, [
          el('h3', {}, [`${basket.name} (${basket.items.length})`]),
          rename,
          items,
        ]),
      )
    }
  }

  const create = button('Create', () => {
    try {
      store.createBasket(name.value.trim())
      name.value = ''
      banner(view, '', 'ok')
    } catch (err) {
      if (err instanceof StoreError) banner(view, err.message, 'error')
    }
  }, 'btn create-basket')

  const save = button('Save workspace', async () => {
    try {
      await api.putWorkspace(store.toWorkspace(), store.session?.login ?? '')
      banner(view, 'Workspace saved.', 'ok')
    } catch (err) {
      banner(view, `Save failed: ${(err as Error).message}`, 'error')
    }
  }, 'btn btn-primary save-workspace')

  view.append(el('div', { class: 'bar' }, [name, create, save]))
  store.subscribe(render)
  render()
  return view
}
