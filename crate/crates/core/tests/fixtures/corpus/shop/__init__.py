from shop.utils.strings import slugify
