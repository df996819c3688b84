// Tiny DOM kit: every view builds from the same helpers and class names,
// which is what keeps the look and feel uniform across screens.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  for (const [k, v] of Object.entries(attrs)) {
    if (k === 'class') node.className = v
    else node.setAttribute(k, v)
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child))
  }
  return node
}

export const panel = (title: string, ...children: (Node | string)[]) =>
  el('section', { class: 'panel' }, [el('h2', {}, [title]), ...children])

export const button = (label: string, onClick: () => void, cls = 'btn') => {
  const b = el('button', { class: cls, type: 'button' }, [label])
  b.addEventListener('click', onClick)
  return b
}

export const field = (label: string, input: HTMLElement) =>
  el('label', { class: 'field' }, [el('span', {}, [label]), input])

export const badge = (text: string, kind: string) =>
  el('span', { class: `badge badge-${kind}` }, [text])

export function banner(container: HTMLElement, text: string, kind: 'error' | 'ok'): void {
  container.querySelectorAll('.banner').forEach((b) => b.remove())
  if (text) container.prepend(el('div', { class: `banner banner-${kind}` }, [text]))
}

export const clear = (node: HTMLElement) => {
  while (node.firstChild) node.removeChild(node.firstChild)
}
