import { escapeHtml } from "./format.js";

/** Dismissible error strip with a retry button.  The caller wires the
 *  button handlers after inserting the markup. */
export function renderErrorBanner(message: string): string {
  return (
    '<div class="banner" role="alert">' +
    `<span class="banner-message">${escapeHtml(message)}</span>` +
    '<button class="banner-retry" type="button">Retry</button>' +
    '<button class="banner-dismiss" type="button">Dismiss</button>' +
    "</div>"
  );
}
