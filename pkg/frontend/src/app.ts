import {
  ApiError,
  AvailabilityClient,
  DrugDetail,
  DrugHit,
  SearchResults,
} from './api.js';

/**
 * The whole consumer page: search form, ranked results, detail pane.
 *
 * Rendering rules the tests pin down:
 *  - rows appear in API order, never re-sorted client side
 *  - Price and DistanceKm strings are shown verbatim
 *  - one search in flight at a time; a new submission aborts the old one
 *  - the loading line and the error banner are never visible together
 */
export class App {
  private readonly client: AvailabilityClient;
  private readonly queryInput: HTMLInputElement;
  private readonly latInput: HTMLInputElement;
  private readonly lonInput: HTMLInputElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly banner: HTMLElement;
  private readonly bannerText: HTMLElement;
  private readonly statusLine: HTMLElement;
  private readonly resultsRegion: HTMLElement;
  private readonly detailRegion: HTMLElement;

  private inFlight: AbortController | null = null;
  private selectedHit: DrugHit | null = null;
  private selectedRow: HTMLTableRowElement | null = null;

  constructor(root: HTMLElement, client: AvailabilityClient) {
    this.client = client;
    root.innerHTML = `
      <header>
        <h1>Drug availability</h1>
        <p class="note">Prices are in the vendor's local currency.</p>
      </header>
      <form id="search-form">
        <input id="query" placeholder="Drug name" autocomplete="off">
        <input id="lat" placeholder="Latitude" autocomplete="off">
        <input id="lon" placeholder="Longitude" autocomplete="off">
        <button id="locate" type="button" hidden>Use my location</button>
        <button id="submit" type="submit" disabled>Search</button>
      </form>
      <div id="banner" class="banner" hidden>
        <span id="banner-text"></span>
        <button id="dismiss" type="button">dismiss</button>
      </div>
      <p id="status" class="status" hidden></p>
      <section id="results"></section>
      <aside id="detail" hidden></aside>
    `;
    const byId = <T extends HTMLElement>(id: string) =>
      root.querySelector(`#${id}`) as T;
    this.queryInput = byId<HTMLInputElement>('query');
    this.latInput = byId<HTMLInputElement>('lat');
    this.lonInput = byId<HTMLInputElement>('lon');
    this.submitButton = byId<HTMLButtonElement>('submit');
    this.banner = byId('banner');
    this.bannerText = byId('banner-text');
    this.statusLine = byId('status');
    this.resultsRegion = byId('results');
    this.detailRegion = byId('detail');

    byId<HTMLFormElement>('search-form').addEventListener('submit', (event) => {
      event.preventDefault();
      void this.submitSearch();
    });
    this.queryInput.addEventListener('input', () => {
      this.submitButton.disabled = this.queryInput.value.trim() === '';
    });
    byId('dismiss').addEventListener('click', () => this.clearError());

    const locate = byId<HTMLButtonElement>('locate');
    if (navigator.geolocation) {
      locate.hidden = false;
      locate.addEventListener('click', () => {
        navigator.geolocation.getCurrentPosition((position) => {
          this.latInput.value = String(position.coords.latitude);
          this.lonInput.value = String(position.coords.longitude);
        });
      });
    }
  }

  /** Used by substitute buttons: fill the form and search again. */
  searchFor(drugName: string): void {
    this.queryInput.value = drugName;
    this.submitButton.disabled = false;
    void this.submitSearch();
  }

  private async submitSearch(): Promise<void> {
    const query = this.queryInput.value.trim();
    if (!query) {
      return;
    }
    const lat = this.latInput.value.trim();
    const lon = this.lonInput.value.trim();
    if ((lat === '') !== (lon === '')) {
      this.showError(
        'HalfLocation',
        'enter both latitude and longitude, or neither',
      );
      return;
    }

    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    this.setLoading(`searching for ${query}...`);

    try {
      const results = await this.client.search(
        query,
        lat ? { lat, lon } : null,
        controller.signal,
      );
      if (this.inFlight !== controller) {
        return;
      }
      this.renderResults(results);
    } catch (error) {
      if (this.inFlight !== controller) {
        return;
      }
      if ((error as Error).name === 'AbortError') {
        return;
      }
      if (error instanceof ApiError) {
        this.showError(error.code, error.message);
      } else {
        this.showError('NetworkError', 'the availability service is unreachable');
      }
    } finally {
      if (this.inFlight === controller) {
        this.inFlight = null;
        this.setLoading(null);
      }
    }
  }

  private renderResults(results: SearchResults): void {
    this.selectedHit = null;
    this.selectedRow = null;
    this.detailRegion.hidden = true;
    this.resultsRegion.replaceChildren();

    const withDistance = results.Drug.some((hit) => hit.DistanceKm !== undefined);
    if (results.Drug.length > 0) {
      const table = document.createElement('table');
      const head = document.createElement('thead');
      const headRow = document.createElement('tr');
      const columns = ['Vendor', 'Price', 'Description'];
      if (withDistance) {
        columns.push('Distance (km)');
      }
      for (const column of columns) {
        const cell = document.createElement('th');
        cell.textContent = column;
        headRow.appendChild(cell);
      }
      head.appendChild(headRow);
      table.appendChild(head);
      const body = document.createElement('tbody');
      const cell = (row: HTMLTableRowElement, text: string, className = '') => {
        const data = document.createElement('td');
        data.textContent = text;
        data.className = className;
        row.appendChild(data);
      };
      for (const hit of results.Drug) {
        const row = document.createElement('tr');
        row.className = 'hit';
        cell(row, hit.VendorName);
        cell(row, hit.Price, 'price');
        cell(row, hit.Description);
        if (withDistance) {
          cell(row, hit.DistanceKm ?? '');
        }
        row.addEventListener('click', () => void this.selectHit(hit, row));
        body.appendChild(row);
      }
      table.appendChild(body);
      this.resultsRegion.appendChild(table);
    } else {
      const empty = document.createElement('p');
      empty.className = 'empty';
      empty.textContent = `No vendor stocks "${results.Query}".`;
      this.resultsRegion.appendChild(empty);
    }

    const diagnostics = results.Diagnostics;
    const footer = document.createElement('p');
    footer.className = 'diagnostics';
    footer.textContent =
      `${results.Drug.length} hits · ` +
      `${diagnostics.ProvidersQueried} providers queried · ` +
      `${diagnostics.Failures.length} failures · ` +
      `${diagnostics.NotFoundCount} not found`;
    this.resultsRegion.appendChild(footer);
    if (diagnostics.Failures.length > 0) {
      const list = document.createElement('ul');
      list.className = 'failures';
      for (const failure of diagnostics.Failures) {
        const item = document.createElement('li');
        item.textContent = `${failure.Vendor}: ${failure.Kind}`;
        list.appendChild(item);
      }
      this.resultsRegion.appendChild(list);
    }
  }

  private async selectHit(hit: DrugHit, row: HTMLTableRowElement): Promise<void> {
    this.selectedHit = hit;
    this.selectedRow?.classList.remove('selected');
    this.selectedRow = row;
    row.classList.add('selected');
    try {
      const detail = await this.client.detail(hit.ServiceId, hit.name);
      if (this.selectedHit !== hit) {
        return;
      }
      this.renderDetail(hit, detail);
    } catch (error) {
      if (this.selectedHit !== hit) {
        return;
      }
      const message =
        error instanceof ApiError && error.code === 'ProviderUnavailable'
          ? 'vendor temporarily unreachable'
          : error instanceof ApiError
            ? `${error.code}: ${error.message}`
            : 'vendor temporarily unreachable';
      this.renderDetailMessage(hit.VendorName, message);
    }
  }

  private renderDetail(hit: DrugHit, detail: DrugDetail): void {
    this.detailRegion.hidden = false;
    this.detailRegion.replaceChildren();

    const heading = document.createElement('h2');
    heading.textContent = hit.VendorName;
    const address = document.createElement('p');
    address.className = 'address';
    address.textContent = detail.VendorAddress;
    const stock = document.createElement('p');
    stock.className = 'stock';
    if (detail.Quantity === 0) {
      const badge = document.createElement('span');
      badge.className = 'badge out-of-stock';
      badge.textContent = 'out of stock';
      stock.appendChild(badge);
    } else {
      stock.textContent = `${detail.Quantity} in stock`;
    }
    this.detailRegion.append(heading, address, stock);

    const substitutesHeading = document.createElement('h3');
    substitutesHeading.textContent = 'Substitutes';
    this.detailRegion.appendChild(substitutesHeading);
    if (detail.Substitutes.length === 0) {
      const none = document.createElement('p');
      none.className = 'no-substitutes';
      none.textContent = 'none listed';
      this.detailRegion.appendChild(none);
    } else {
      for (const substitute of detail.Substitutes) {
        const button = document.createElement('button');
        button.type = 'button';
        button.className = 'substitute';
        button.textContent = substitute;
        button.addEventListener('click', () => this.searchFor(substitute));
        this.detailRegion.appendChild(button);
      }
    }
  }

  private renderDetailMessage(vendorName: string, message: string): void {
    this.detailRegion.hidden = false;
    this.detailRegion.replaceChildren();
    const heading = document.createElement('h2');
    heading.textContent = vendorName;
    const note = document.createElement('p');
    note.className = 'detail-error';
    note.textContent = message;
    this.detailRegion.append(heading, note);
  }

  private setLoading(message: string | null): void {
    if (message !== null) {
      this.clearError();
      this.statusLine.textContent = message;
      this.statusLine.hidden = false;
    } else {
      this.statusLine.hidden = true;
    }
  }

  private showError(code: string, message: string): void {
    this.statusLine.hidden = true;
    this.bannerText.textContent = `${code}: ${message}`;
    this.banner.hidden = false;
  }

  private clearError(): void {
    this.banner.hidden = true;
    this.bannerText.textContent = '';
  }
}
