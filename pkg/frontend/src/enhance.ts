/** Client-side finishing of server fragments: code highlighting and math.
 *
 * The server ships sanitized HTML with language-classed code blocks and
 * math spans left verbatim ($...$ / $$...$$). Highlighting and math
 * wrapping happen here, after injection, and never alter the text
 * content of what the server sent.
 */

const PYTHON_TOKEN = new RegExp(
  [
    "(#[^\\n]*)",
    "(\"\"\"[\\s\\S]*?\"\"\"|'''[\\s\\S]*?'''" +
      "|\"(?:\\\\.|[^\"\\\\\\n])*\"|'(?:\\\\.|[^'\\\\\\n])*')",
    "(@[A-Za-z_][\\w.]*)",
    "\\b(\\d+(?:\\.\\d+)?(?:[eE][+-]?\\d+)?j?)\\b",
    "\\b(False|None|True|and|as|assert|async|await|break|class|continue|def" +
      "|del|elif|else|except|finally|for|from|global|if|import|in|is|lambda" +
      "|nonlocal|not|or|pass|raise|return|try|while|with|yield)\\b",
  ].join("|"),
  "g",
);

const TOKEN_CLASSES = ["hl-comment", "hl-string", "hl-decorator", "hl-number", "hl-keyword"];

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Plain code text in, span-decorated HTML out; text content unchanged. */
export function highlightPython(code: string): string {
  let html = "";
  let last = 0;
  PYTHON_TOKEN.lastIndex = 0;
  for (let m = PYTHON_TOKEN.exec(code); m !== null; m = PYTHON_TOKEN.exec(code)) {
    if (m[0] === "") {
      // zero-width match would stall exec(); skip one char
      PYTHON_TOKEN.lastIndex += 1;
      continue;
    }
    html += escapeHtml(code.slice(last, m.index));
    const groupIndex = m.slice(1).findIndex((g) => g !== undefined);
    html += `<span class="${TOKEN_CLASSES[groupIndex]}">${escapeHtml(m[0])}</span>`;
    last = m.index + m[0].length;
  }
  return html + escapeHtml(code.slice(last));
}

const MATH_SPAN = /\$\$([^$]+)\$\$|\$([^$\n]+)\$/g;

declare global {
  interface Window {
    katex?: { render(tex: string, el: HTMLElement, opts?: object): void };
  }
}

function typesetNode(node: Text): void {
  const text = node.nodeValue ?? "";
  MATH_SPAN.lastIndex = 0;
  if (!MATH_SPAN.test(text)) return;
  MATH_SPAN.lastIndex = 0;
  const doc = node.ownerDocument;
  const replacement = doc.createDocumentFragment();
  let last = 0;
  for (let m = MATH_SPAN.exec(text); m !== null; m = MATH_SPAN.exec(text)) {
    replacement.appendChild(doc.createTextNode(text.slice(last, m.index)));
    const display = m[1] !== undefined;
    const span = doc.createElement("span");
    span.className = display ? "math-display" : "math-inline";
    span.textContent = m[0]; // delimiters kept: the text stays verbatim
    const katex = doc.defaultView?.katex;
    if (katex) {
      katex.render((m[1] ?? m[2]) as string, span, {
        displayMode: display,
        throwOnError: false,
      });
    }
    replacement.appendChild(span);
    last = m.index + m[0].length;
  }
  replacement.appendChild(doc.createTextNode(text.slice(last)));
  node.parentNode?.replaceChild(replacement, node);
}

const SKIP_MATH_INSIDE = new Set(["CODE", "PRE", "SCRIPT", "STYLE"]);

function collectTextNodes(root: ParentNode): Text[] {
  const found: Text[] = [];
  const walk = (node: Node): void => {
    if (node.nodeType === 3) {
      found.push(node as Text);
      return;
    }
    if (node.nodeType === 1 && SKIP_MATH_INSIDE.has((node as Element).tagName)) return;
    for (const child of Array.from(node.childNodes)) walk(child);
  };
  for (const child of Array.from(root.childNodes)) walk(child);
  return found;
}

/** Decorate an injected fragment in place: highlight code, wrap math. */
export function enhanceFragment(root: ParentNode): void {
  for (const block of Array.from(root.querySelectorAll("pre code"))) {
    const language = Array.from(block.classList).find((c) => c.startsWith("language-"));
    if (language && language !== "language-python") continue;
    block.innerHTML = highlightPython(block.textContent ?? "");
  }
  for (const node of collectTextNodes(root)) typesetNode(node);
}
